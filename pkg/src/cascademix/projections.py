"""Euclidean projections used by the constrained M-steps."""

from __future__ import annotations

import numpy as np

from .errors import SvdFailure


def project_simplex(v: np.ndarray, s: float = 1.0) -> np.ndarray:
    """Project ``v`` onto ``{w >= 0, sum(w) = s}`` by sort-and-threshold (O(n log n))."""
    v = np.asarray(v, dtype=float)
    if s < 0:
        raise ValueError("simplex radius must be nonnegative")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a vector with non-finite entries")
    if v.size == 0:
        return v.copy()
    if s == 0:
        return np.zeros_like(v)
    u = np.sort(v.ravel())[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    active = np.nonzero(u * k > css - s)[0]
    # for a radius below round-off of the entries the test can fail everywhere; keep the top entry
    rho = active[-1] if active.size else 0
    tau = (css[rho] - s) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def project_nonneg_l1_ball(v: np.ndarray, s: float) -> np.ndarray:
    """Project onto ``{w >= 0, sum(w) <= s}``."""
    w = np.maximum(np.asarray(v, dtype=float), 0.0)
    if w.sum() <= s:
        return w
    return project_simplex(v, s)


def project_capped_l1(v: np.ndarray, s: float, upper: float, tol: float = 1e-13) -> np.ndarray:
    """Project onto ``{0 <= w <= upper, sum(w) <= s}``.

    The solution is ``clip(v - tau, 0, upper)`` with the smallest ``tau >= 0``
    meeting the budget; ``tau`` is found by bisection on the monotone sum.
    """
    v = np.asarray(v, dtype=float)
    w = np.clip(v, 0.0, upper)
    if w.sum() <= s:
        return w
    lo, hi = 0.0, float(np.max(v))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, 0.0, upper).sum() > s:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return np.clip(v - hi, 0.0, upper)


def _svd(x: np.ndarray):
    try:
        return np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc


def nuclear_norm(x: np.ndarray) -> float:
    """Sum of singular values."""
    try:
        return float(np.sum(np.linalg.svd(np.asarray(x, dtype=float), compute_uv=False)))
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(str(exc)) from exc


def project_nuclear_ball(x: np.ndarray, rho: float) -> np.ndarray:
    """Project onto ``{||X||_* <= rho}`` by projecting the singular values onto the l1 ball."""
    x = np.asarray(x, dtype=float)
    if rho <= 0:
        return np.zeros_like(x)
    u, sig, vt = _svd(x)
    if sig.sum() <= rho:
        return x.copy()
    sig = project_simplex(sig, rho)
    return (u * sig) @ vt


def project_box_zero_diag(x: np.ndarray, upper: float) -> np.ndarray:
    out = np.clip(x, 0.0, upper)
    np.fill_diagonal(out, 0.0)
    return out


def project_psi(x: np.ndarray, rho: float, upper: float, dykstra_passes: int = 0) -> np.ndarray:
    """Map ``x`` to a feasible latent network: ``||X||_* <= rho``, entries in ``[0, upper]``, zero diagonal.

    Nuclear-ball projection followed by clamping. This is not the exact
    projection onto the intersection; ``dykstra_passes`` runs Dykstra's
    alternating scheme to get closer to it. Clamping can push the nuclear norm
    back over ``rho``, so a final uniform rescale (which keeps the box and the
    zero pattern) restores feasibility.
    """
    if rho <= 0:
        return np.zeros_like(x)
    if dykstra_passes > 0:
        cur = np.asarray(x, dtype=float)
        p = np.zeros_like(cur)
        q = np.zeros_like(cur)
        for _ in range(dykstra_passes):
            y = project_nuclear_ball(cur + p, rho)
            p = cur + p - y
            cur_next = project_box_zero_diag(y + q, upper)
            q = y + q - cur_next
            cur = cur_next
        out = cur
    else:
        out = project_box_zero_diag(project_nuclear_ball(x, rho), upper)
    norm = nuclear_norm(out)
    if norm > rho:
        out = out * (rho / norm)
    return out
