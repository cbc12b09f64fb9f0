"""Simultaneous-iteration polynomial root finding (Aberth-Ehrlich).

Coefficients are given highest degree first, as in ``numpy.polyval``.
"""

import numpy as np

__all__ = ["find_roots", "RootFindingError"]


class RootFindingError(RuntimeError):
    """Raised when the iteration fails to converge."""


def _strip(poly):
    c = np.atleast_1d(np.asarray(poly, dtype=complex))
    nz = np.flatnonzero(c != 0)
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    return c[nz[0]:]


def _relative_residual(c, z):
    # |p(z)| against the magnitude of the terms summed, a backward-error measure
    num = np.abs(np.polyval(c, z))
    den = np.polyval(np.abs(c), np.abs(z))
    return num / np.maximum(den, np.finfo(float).tiny)


def _initial_guesses(c, rng):
    n = len(c) - 1
    # Fujiwara-style radius bound, then spread over a rotated circle
    ratios = np.abs(c[1:] / c[0]) ** (1.0 / np.arange(1, n + 1))
    radius = max(float(np.max(ratios)), 1e-3)
    angles = 2 * np.pi * np.arange(n) / n + 0.4 + rng.uniform(0, 0.1)
    return 0.5 * radius * np.exp(1j * angles)


def _aberth(c, z, maxiter, tol):
    dc = np.polyder(c)
    best = np.inf
    stall = 0
    for _ in range(maxiter):
        p = np.polyval(c, z)
        dp = np.polyval(dc, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            step = ratio / (1.0 - ratio * inv.sum(axis=1))
        bad = ~np.isfinite(step)
        if bad.any():
            if np.all(p[bad] == 0):
                step[bad] = 0.0
            else:
                step[bad] = 1e-3 * (1 + np.abs(z[bad]))
        z = z - step
        size = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(z))))
        # tiny steps near a very small root are not yet converged in the
        # relative sense, so the residual must agree
        if size <= 4 * np.finfo(float).eps and np.all(_relative_residual(c, z) < tol):
            break
        # multiple roots converge linearly down to a rounding floor; stop
        # once steps no longer shrink
        if size < 0.5 * best:
            best = size
            stall = 0
        else:
            stall += 1
            if stall >= 8 and np.all(_relative_residual(c, z) < tol):
                break
    return z, bool(np.all(_relative_residual(c, z) < tol))


def _polish_multiple(c, centre, m):
    # Newton on the (m-1)-th derivative, which has a simple root at an m-fold root
    d1 = np.polyder(c, m - 1)
    d2 = np.polyder(d1)
    for _ in range(10):
        dd = np.polyval(d2, centre)
        if dd == 0:
            break
        delta = np.polyval(d1, centre) / dd
        centre = centre - delta
        if abs(delta) <= 2 * np.finfo(float).eps * max(1.0, abs(centre)):
            break
    return centre


def _coefficient_error(c, z):
    rebuilt = c[0] * np.poly(z)
    return float(np.linalg.norm(rebuilt - c) / np.linalg.norm(c))


def _merge_clusters(c, z, radius=0.1):
    """Replace numerically split multiple roots by one polished value.

    The m computed roots around an m-fold root scatter like eps**(1/m).
    A candidate group is kept only if the merged root set reproduces the
    coefficients at least as well as the unmerged one.
    """
    z = z.copy()
    done = np.zeros(len(z), dtype=bool)
    for i in np.argsort(np.abs(z)):
        if done[i]:
            continue
        dist = np.abs(z - z[i])
        near = np.flatnonzero((dist < radius * max(1.0, abs(z[i]))) & ~done)
        near = near[np.argsort(dist[near])]
        base = _coefficient_error(c, z)
        for m in range(near.size, 1, -1):
            members = near[:m]
            trial = z.copy()
            trial[members] = _polish_multiple(c, z[members].mean(), m)
            if _coefficient_error(c, trial) <= max(base, 1e-15):
                z = trial
                done[members] = True
                break
    return z


def find_roots(poly, tol=1e-8, maxiter=1000, seed=0):
    """Return the roots of a polynomial (highest-degree coefficient first).

    Parameters
    ----------
    poly : array_like
        Real or complex coefficients. Leading zeros are stripped.
    tol : float
        Convergence threshold on the relative residual at every root.
    maxiter : int
        Iteration budget per attempt; a stagnating attempt is restarted
        from perturbed initial guesses.

    Returns
    -------
    roots : ndarray of complex, unordered

    Raises
    ------
    ValueError
        If the polynomial has degree < 1.
    RootFindingError
        If no attempt converges.
    """
    c = _strip(poly)
    n = len(c) - 1
    if n < 1:
        raise ValueError("polynomial degree must be at least 1")
    # exact zero roots
    nzero = 0
    while n > 0 and c[-1] == 0:
        c = c[:-1]
        n -= 1
        nzero += 1
    zeros = np.zeros(nzero, dtype=complex)
    if n == 0:
        return zeros
    if n == 1:
        return np.concatenate([zeros, [-c[1] / c[0]]])

    rng = np.random.default_rng(seed)
    z = _initial_guesses(c, rng)
    for attempt in range(4):
        z, converged = _aberth(c, z, maxiter, tol)
        if converged:
            return np.concatenate([zeros, _merge_clusters(c, z)])
        # restart with perturbed guesses around the stagnated estimates
        z = z + 1e-3 * (1 + np.abs(z)) * np.exp(2j * np.pi * rng.uniform(size=n))
    raise RootFindingError(f"no convergence after {maxiter} iterations")
