"""Knowledge-driven Linux kernel configuration tuning toolkit."""

__version__ = "0.1.0"
