"""Kernel backend selection.

The hot numeric kernels exist twice: a jitted numba version and a pure-numpy
fallback. ``ATTMARL_BACKEND`` picks one at import time:

* unset or ``auto`` — numba if importable, else numpy;
* ``numba`` — require numba, fail loudly if missing;
* ``numpy`` — force the fallback (also handy for benchmarking).

``attmarl.backend.K`` is the selected kernel module; everything downstream
imports kernels through it.
"""

import logging
import os

from .errors import ConfigError

_log = logging.getLogger(__name__)

_choice = os.environ.get("ATTMARL_BACKEND", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"ATTMARL_BACKEND must be 'auto', 'numba' or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    from . import _kernels_numpy as K
elif _choice == "numba":
    from . import _kernels_numba as K
else:
    try:
        from . import _kernels_numba as K
    except ImportError:  # pragma: no cover - depends on install
        _log.info("numba unavailable, using numpy kernels")
        from . import _kernels_numpy as K


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return K.NAME
