"""Python access to the probabilistic logic engine and its model server."""

try:
    from ._core import Engine, pretty_print
except ImportError:  # the reference model server works without the extension
    Engine = None
    pretty_print = None

__all__ = ["Engine", "pretty_print"]
