"""Bridge child process serving metric scores over line-delimited JSON."""

__version__ = "0.1.0"
