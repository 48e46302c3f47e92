"""Divergence-regularized optimal transport on discrete marginals."""

try:
    from ._rotlab import *  # noqa: F401,F403
    from ._rotlab import __version__  # noqa: F401
except ImportError:  # running against a build tree via PYTHONPATH
    from _rotlab import *  # noqa: F401,F403
    from _rotlab import __version__  # noqa: F401
