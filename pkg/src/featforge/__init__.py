"""Feature extraction, feature-set selection and a multi-branch 1D-CNN for fake-news text."""
__version__ = "0.1.0"
