"""No-reference image quality metrics, EEG band analysis, and dataset
comparison reports, plus a batch CLI tying them together."""

__version__ = "0.1.0"
