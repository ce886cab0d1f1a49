"""Natural-language GUI task automation over per-app screen-transition graphs."""

__version__ = "0.1.0"
