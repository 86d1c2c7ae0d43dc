"""Ice hockey game reports from structured game statistics."""

__version__ = "0.1.0"
