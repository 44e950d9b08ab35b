"""Numeric kernel backend selection.

Two interchangeable implementations: ``pyref`` (numpy) and ``_ckern``
(compiled).  ``MVSOLVER_KERNELS`` picks one explicitly ("python" or
"compiled"); the default "auto" prefers the compiled extension and falls
back silently when it was not built.
"""

import os

from . import pyref

impl = pyref
BACKEND = "python"

_choice = os.environ.get("MVSOLVER_KERNELS", "auto")
if _choice not in ("auto", "python", "compiled"):
    raise ValueError(
        "MVSOLVER_KERNELS must be 'auto', 'python' or 'compiled', got %r" % _choice
    )
if _choice != "python":
    try:
        from . import _ckern

        impl = _ckern
        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
