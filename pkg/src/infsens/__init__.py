"""Single- and multi-model linear inferential sensors."""

__version__ = "0.1.0"
