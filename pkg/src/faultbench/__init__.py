"""Fault-diagnosis benchmark on a surrogate 118-bus grid.

Modules: ``gridsim`` (datasets), ``preprocess`` (min-max), ``featsel``
(feature rankings), ``dimred`` (projections), ``classify`` (kNN, linear
SVM, random forest), ``evalcv`` (metrics and cross-validation) and
``bench`` (the method matrix and reports).
"""
__version__ = "0.1.0"
