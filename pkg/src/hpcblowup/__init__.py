from __future__ import annotations

from hpcblowup._version import version as __version__

__all__ = ["__version__"]
