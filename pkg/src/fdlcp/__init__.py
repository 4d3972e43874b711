"""Fast dictionary learning on classified patches for compressed-sensing MRI."""

__version__ = "0.1.0"
