"""Backend selection for the per-iteration solver loops.

The hot loops exist twice with identical contracts: a Cython extension
(``_iter_cy``, built at install time) and a pure-numpy fallback
(``_iter_np``).  The compiled one is picked at import when available.
Set ``MIMO_JED_BACKEND`` to ``numpy`` or ``cython`` to force a backend
(``cython`` raises if the extension was not built); default is ``auto``.

Iteration-state recording always routes through the numpy backend, which
is the only one that supports callbacks.
"""

from __future__ import annotations

import os

from . import _iter_np

_choice = os.environ.get("MIMO_JED_BACKEND", "auto").lower()

if _choice == "numpy":
    _impl = _iter_np
elif _choice in ("auto", "cython"):
    try:
        from . import _iter_cy as _impl
    except ImportError:
        if _choice == "cython":
            raise ImportError(
                "MIMO_JED_BACKEND=cython but the compiled kernel is not "
                "available; reinstall with a C compiler or use numpy/auto"
            ) from None
        _impl = _iter_np
else:
    raise ValueError(f"unknown MIMO_JED_BACKEND value {_choice!r}; use auto, cython or numpy")

BACKEND = _impl.BACKEND_NAME


def admm_iterations(y_t, y_d, x_t, h0, rho, noise_ratio, iterations, box_radius,
                    state_callback=None):
    if state_callback is not None:
        return _iter_np.admm_iterations(y_t, y_d, x_t, h0, rho, noise_ratio,
                                        iterations, box_radius,
                                        state_callback=state_callback)
    return _impl.admm_iterations(y_t, y_d, x_t, h0, rho, noise_ratio,
                                 iterations, box_radius)


def am_iterations(y_t, y_d, x_t, h0, noise_ratio, iterations, box_radius,
                  ridge_scale=1e-12, state_callback=None):
    if state_callback is not None:
        return _iter_np.am_iterations(y_t, y_d, x_t, h0, noise_ratio,
                                      iterations, box_radius,
                                      ridge_scale=ridge_scale,
                                      state_callback=state_callback)
    return _impl.am_iterations(y_t, y_d, x_t, h0, noise_ratio, iterations,
                               box_radius, ridge_scale)
