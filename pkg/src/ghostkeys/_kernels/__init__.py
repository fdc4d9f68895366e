"""Subsequence-enumeration kernel with a compiled fast path.

The guessing oracle's inner loop enumerates every distinct subsequence of an
observed string and keeps the top-k by score.  That loop is worth a compiled
extension; everything else in the package is plain Python.  The extension is
optional: if it failed to build, or GHOSTKEYS_PURE=1 is set, the pure-Python
twin is used instead.  Both produce bit-identical results.
"""

import os

from . import _pure

if os.environ.get("GHOSTKEYS_PURE") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _subseq as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

top_subsequences = _impl.top_subsequences
