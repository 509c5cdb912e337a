"""quill: learned inference and insertion of @Nullable qualifiers for Java.

Pipeline: parse Java into typed-node/typed-edge graphs, transform them into
pruned name-augmented graphs, train graph models (GCN / FastGTN) on the
harvested-then-erased annotations, predict per-declaration nullability,
threshold, reconcile with consistency rules, and write the surviving
annotations back into the source.
"""

__version__ = "0.1.0"
