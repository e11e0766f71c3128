"""Facial-palsy triage from 68-point landmarks.

Geometric preprocessing, three feature views, five from-scratch classifiers,
a leave-one-out evaluation harness, and a dataset-size scaling study with
exponential-curve extrapolation.
"""

from palsy._core import backend_name

__version__ = "0.1.0"
__all__ = ["backend_name", "__version__"]
