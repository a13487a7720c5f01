"""Total-differential three-phase data and global-pressure toolkit."""

__version__ = "0.1.0"
