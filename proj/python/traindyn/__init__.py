"""Identify mislabeled training samples from their training dynamics."""

try:
    from ._traindyn import *  # noqa: F401,F403
except ImportError:  # build-tree layout: extension sits next to the package on sys.path
    from _traindyn import *  # noqa: F401,F403

__version__ = "0.1.0"
