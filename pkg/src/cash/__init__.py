"""Combined algorithm selection and hyperparameter optimization."""

__version__ = "0.1.0"
