"""Multi-source adversarial pretraining for low-resource dialogue summarization."""

__version__ = "0.1.0"
