"""Initial-noise adjustment laboratory for conditional diffusion worlds."""

try:
    from ._basinlab import *  # packaged layout: module installed inside the package
    from . import _basinlab as _core
except ImportError:  # in-tree builds put the module next to the package on sys.path
    from _basinlab import *  # noqa: F401,F403
    import _basinlab as _core

__version__ = "0.1.0"
__all__ = [name for name in dir(_core) if not name.startswith("_")]
