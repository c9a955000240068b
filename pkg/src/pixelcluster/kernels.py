"""Dispatch surface for the hot kernels.

Imports whichever backend `backend.ACTIVE` resolved to and re-exports its
functions under stable names. The two implementations agree to floating
point noise; the test suite cross-checks them whenever numba is importable.
"""

from . import backend
from . import kernels_numpy

if backend.ACTIVE == "numba":
    from . import kernels_numba as _impl
else:
    _impl = kernels_numpy

ACTIVE_BACKEND = backend.ACTIVE

conv3x3_forward = _impl.conv3x3_forward
conv3x3_backward = _impl.conv3x3_backward
maxpool2x2_forward = _impl.maxpool2x2_forward
maxpool2x2_backward = _impl.maxpool2x2_backward
upsample2x_forward = _impl.upsample2x_forward
upsample2x_backward = _impl.upsample2x_backward
pairwise_sqdist = _impl.pairwise_sqdist
lbp_codes = _impl.lbp_codes
hog_cell_hist = _impl.hog_cell_hist
perplexity_search = _impl.perplexity_search
