"""Dense numerical kernels.

Closed-form rank-one least squares, an active-set non-negative least
squares solver, Euclidean projections onto the constraint sets used by the
guided factorizations, tensor matricization/vectorization, power-method
eigenvalues and a small deterministic PCA.  Everything here is pure and
reentrant; callers may run kernels concurrently on distinct inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


# ---------------------------------------------------------------------------
# constraint set descriptions


@dataclass(frozen=True)
class L1Ball:
    """The set {x : x >= 0, ||x||_1 <= eps}."""

    eps: float

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError("L1 radius must be non-negative")


@dataclass(frozen=True)
class HalfspaceSet:
    """Intersection of {x : a_i . x <= eps_i} with the non-negative orthant.

    Directions are non-negative by construction (they are rows or columns of
    non-negative factors), which makes x = 0 feasible for every member.
    """

    directions: np.ndarray  # (m, d)
    eps: np.ndarray  # (m,)

    def __post_init__(self):
        directions = np.atleast_2d(np.asarray(self.directions, dtype=float))
        eps = np.atleast_1d(np.asarray(self.eps, dtype=float))
        if directions.shape[0] != eps.shape[0]:
            raise ValueError("one bound per direction required")
        if directions.size and directions.min() < 0:
            raise ValueError("halfspace directions must be non-negative")
        if eps.size and eps.min() < 0:
            raise ValueError("halfspace bounds must be non-negative")
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "eps", eps)

    @classmethod
    def from_rows(cls, rows):
        """Build from an iterable of (direction, eps) pairs."""
        rows = list(rows)
        if not rows:
            return cls(np.zeros((0, 0)), np.zeros(0))
        dirs = np.vstack([np.asarray(a, dtype=float) for a, _ in rows])
        eps = np.array([float(e) for _, e in rows])
        return cls(dirs, eps)


# ---------------------------------------------------------------------------
# least squares


def least_squares_col(rmat, frow):
    """Unconstrained minimizer of ||R - x f|| over the column vector x.

    The closed form is x* = (R f) / (f . f).  An all-zero ``frow`` returns
    the zero vector; this keeps alternating sweeps well-defined when a role
    dies.
    """
    rmat = np.asarray(rmat, dtype=float)
    frow = np.asarray(frow, dtype=float)
    den = float(frow @ frow)
    if den == 0.0:
        return np.zeros(rmat.shape[0])
    return (rmat @ frow) / den


def nnls(a, b, tol=None, max_iter=None):
    """Solve min ||A x - b|| subject to x >= 0 by active-set iteration.

    Returns a KKT point: the gradient w = A^T(Ax - b) is ~0 on the support
    and non-negative off it.  The problem is always feasible so no error is
    raised for valid inputs.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError("incompatible dimensions for nnls")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("nnls inputs must be finite")
    return nnls_gram(a.T @ a, a.T @ b, tol=tol, max_iter=max_iter)


def nnls_gram(gram, atb, tol=None, max_iter=None):
    """Active-set NNLS given the normal-equation pair (A^T A, A^T b).

    Sharing a precomputed Gram matrix across many right-hand sides is what
    makes row-wise factor updates cheap.
    """
    gram = np.asarray(gram, dtype=float)
    atb = np.asarray(atb, dtype=float)
    n = atb.shape[0]
    if n == 0:
        return np.zeros(0)
    if tol is None:
        tol = 1e-11 * max(1.0, float(np.abs(atb).max()))
    if max_iter is None:
        max_iter = 50 * (n + 1)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = atb.copy()

    for _ in range(max_iter):
        candidates = ~passive & (w > tol)
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True

        for _ in range(max_iter):
            idx = np.flatnonzero(passive)
            sub = gram[np.ix_(idx, idx)]
            rhs = atb[idx]
            try:
                z_sub = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                z_sub = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            if z_sub.min() > 0:
                x = np.zeros(n)
                x[idx] = z_sub
                break
            # Step toward z until the first passive coordinate hits zero.
            cur = x[idx]
            bad = z_sub <= 0
            ratios = cur[bad] / (cur[bad] - z_sub[bad])
            alpha = float(ratios.min())
            x[idx] = cur + alpha * (z_sub - cur)
            drop = idx[x[idx] <= 1e-14 * max(1.0, float(np.abs(x).max()))]
            x[drop] = 0.0
            passive[drop] = False
            if not passive.any():
                x = np.zeros(n)
                break
        w = atb - gram @ x

    return x


# ---------------------------------------------------------------------------
# Euclidean projections


def project_l1_nonneg(v, eps):
    """Project v onto {x >= 0, ||x||_1 <= eps}.

    Negative coordinates clamp to zero; if the clamped point is still
    outside the ball, the simplex-style soft threshold finishes the job.
    Both steps together give the exact Euclidean projection.
    """
    if not eps >= 0:
        raise ValueError("eps must be non-negative")
    v = np.asarray(v, dtype=float)
    w = np.clip(v, 0.0, None)
    if eps == 0.0:
        return np.zeros_like(w)
    total = w.sum()
    if total <= eps:
        return w
    u = np.sort(w)[::-1]
    css = np.cumsum(u)
    ranks = np.arange(1, w.size + 1)
    # Inclusive comparison: the first index always qualifies, which keeps the
    # threshold defined even when eps is below the ulp of the top coordinate.
    rho = int(np.nonzero(u >= (css - eps) / ranks)[0][-1])
    theta = (css[rho] - eps) / (rho + 1.0)
    return np.maximum(w - theta, 0.0)


def _project_halfspace(x, a, eps, a_norm2):
    val = a @ x
    if val <= eps or a_norm2 == 0.0:
        return x
    return x - ((val - eps) / a_norm2) * a


def _polish_halfspace_projection(v, directions, eps, x):
    """Refine a Dykstra iterate to the exact projection via its KKT system.

    Guesses the active set from ``x``, solves for the multipliers, and
    returns the exact projection when the guess validates.  Returns None
    when it does not; the caller keeps the iterate.
    """
    scale = max(1.0, float(np.abs(v).max()))
    act_tol = 1e-7 * scale
    zero = x <= act_tol
    free = ~zero
    vals = directions @ x
    active = np.flatnonzero(vals >= eps - act_tol * np.maximum(1.0, np.abs(directions).sum(axis=1)))

    if active.size:
        a_free = directions[np.ix_(active, np.flatnonzero(free))]
        system = a_free @ a_free.T
        rhs = directions[active][:, free] @ v[free] - eps[active]
        try:
            lam = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            lam, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        if lam.size and lam.min() < -1e-10 * scale:
            return None
        lam = np.clip(lam, 0.0, None)
    else:
        lam = np.zeros(0)

    cand = v - directions[active].T @ lam if active.size else v.copy()
    cand[zero] = 0.0
    cand = np.where(free, cand, 0.0)

    tol = 1e-9 * scale
    if cand.min() < -tol:
        return None
    cand = np.clip(cand, 0.0, None)
    if directions.size and (directions @ cand - eps).max() > tol:
        return None
    # Stationarity on the zero coordinates: moving off zero must not help.
    grad_zero = v - (directions[active].T @ lam if active.size else 0.0)
    if zero.any() and np.max(np.atleast_1d(grad_zero)[zero], initial=-np.inf) > tol:
        return None
    return cand


def _ldp_projection(v, directions, eps):
    """Exact projection via least-distance programming reduced to NNLS.

    min ||x - v|| s.t. x >= 0, Ax <= eps is an LDP in y = x - v with
    constraints G y >= h - G v, G = [I; -A], h = [0; -eps]; its solution
    falls out of one NNLS solve on the stacked system.  Returns None when
    the recovered point fails validation.
    """
    d = v.shape[0]
    g_rows = np.vstack([np.eye(d), -directions])
    h_shift = np.concatenate([np.zeros(d), -eps]) - g_rows @ v
    e_mat = np.vstack([g_rows.T, h_shift])
    f_vec = np.zeros(d + 1)
    f_vec[d] = 1.0
    u = nnls(e_mat, f_vec)
    r = e_mat @ u - f_vec
    if abs(r[d]) < 1e-14:
        return None
    x = -r[:d] / r[d] + v
    # A positive multiplier on a non-negativity row means that coordinate is
    # exactly zero at the solution; snap it to kill rounding crumbs.
    x[u[:d] > 0] = 0.0
    scale = max(1.0, float(np.abs(v).max()))
    if x.min() < -1e-9 * scale:
        return None
    x = np.clip(x, 0.0, None)
    if (directions @ x - eps).max() > 1e-9 * scale:
        return None
    return x


def project_halfspaces_nonneg(v, halfspaces, tol=1e-10, max_cycles=10000):
    """Project v onto the orthant intersected with every halfspace.

    Dykstra's cyclic scheme alternates exact projections onto the orthant
    and each halfspace; a final polish (active-set KKT solve, falling back
    to an exact least-distance reformulation) upgrades the iterate to the
    exact projection in the usual case.  The result is always exactly
    non-negative.
    """
    v = np.asarray(v, dtype=float)
    directions = halfspaces.directions
    eps = halfspaces.eps
    if directions.size == 0 or directions.shape[1] != v.shape[0]:
        if directions.size == 0:
            return np.clip(v, 0.0, None)
        raise ValueError("halfspace dimension does not match the vector")

    norms2 = np.einsum("ij,ij->i", directions, directions)
    m = directions.shape[0]
    x = v.copy()
    corrections = [np.zeros_like(v) for _ in range(m + 1)]

    change = np.inf
    for _ in range(max_cycles):
        start = x
        y = x + corrections[0]
        x = np.clip(y, 0.0, None)
        corrections[0] = y - x
        for i in range(m):
            y = x + corrections[i + 1]
            x = _project_halfspace(y, directions[i], eps[i], norms2[i])
            corrections[i + 1] = y - x
        change = float(np.max(np.abs(x - start)))
        if change < tol:
            # Both polish paths validate feasibility and optimality before
            # returning, so prefer them over the raw iterate.
            polished = _polish_halfspace_projection(v, directions, eps, x)
            if polished is None:
                polished = _ldp_projection(v, directions, eps)
            return polished if polished is not None else np.clip(x, 0.0, None)
    raise ConvergenceError(
        f"halfspace projection did not converge within {max_cycles} cycles",
        best=x,
        change=change,
    )


# ---------------------------------------------------------------------------
# tensor layout


def matricize(tensor, mode):
    """Unfold a 3-way tensor along ``mode`` (1, 2 or 3).

    Rows follow the chosen mode; columns run over the remaining modes in
    ascending order with the lower mode varying fastest, so that the
    matricized reconstruction identity with Kronecker factors (higher mode
    on the left) holds exactly.
    """
    tensor = np.asarray(tensor, dtype=float)
    if tensor.ndim != 3:
        raise ValueError("matricize expects a 3-way tensor")
    if mode not in (1, 2, 3):
        raise ValueError("mode must be 1, 2 or 3")
    d = mode - 1
    return np.reshape(np.moveaxis(tensor, d, 0), (tensor.shape[d], -1), order="F")


def fold(matrix, mode, dims):
    """Inverse of :func:`matricize` for a target shape ``dims``."""
    matrix = np.asarray(matrix, dtype=float)
    if mode not in (1, 2, 3):
        raise ValueError("mode must be 1, 2 or 3")
    d = mode - 1
    rest = tuple(dims[i] for i in range(3) if i != d)
    arr = np.reshape(matrix, (dims[d],) + rest, order="F")
    return np.moveaxis(arr, 0, d)


def vectorize(tensor):
    """Flatten with the first mode fastest, then the second, then the third."""
    return np.reshape(np.asarray(tensor, dtype=float), -1, order="F")


def unvectorize(vec, dims):
    """Inverse of :func:`vectorize`."""
    return np.reshape(np.asarray(vec, dtype=float), dims, order="F")


# ---------------------------------------------------------------------------
# eigenvalues and PCA


def _dominant_eig(op, tol, max_iter, rng):
    """Dominant eigenpair of an operator whose spectrum is real positive."""
    n = op.shape[0]
    x = rng.uniform(0.1, 1.0, size=n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = op @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0, x
        y /= ny
        lam = float(y @ (op @ y))
        if np.linalg.norm(op @ y - lam * y) <= tol * max(1.0, abs(lam)):
            return lam, y
        x = y
    raise ConvergenceError(
        f"power iteration did not converge within {max_iter} iterations",
        best=x,
        change=lam,
    )


def top_two_eigs(m, tol=1e-9, max_iter=50000):
    """Two largest-magnitude eigenvalues of a real-spectrum square matrix.

    Intended for symmetric matrices and random-walk transition matrices of
    undirected graphs (whose spectra are real).  Power iteration runs on
    shifted operators so both spectrum ends are reachable, with one
    two-sided deflation for the runner-up.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    n = m.shape[0]
    if n < 2:
        raise ValueError("need at least a 2x2 matrix for two eigenvalues")

    rng = np.random.default_rng(0)
    inner_tol = max(tol * 1e-3, 1e-13)
    c = float(np.abs(m).sum(axis=1).max()) + 1.0
    ident = np.eye(n)
    a_plus = m + c * ident
    a_minus = c * ident - m

    mu_hi, v_hi = _dominant_eig(a_plus, inner_tol, max_iter, rng)
    lam_hi = mu_hi - c
    mu_lo, v_lo = _dominant_eig(a_minus, inner_tol, max_iter, rng)
    lam_lo = c - mu_lo

    if abs(lam_hi) >= abs(lam_lo):
        lam1, v1, side_plus = lam_hi, v_hi, True
        lam_other = lam_lo
    else:
        lam1, v1, side_plus = lam_lo, v_lo, False
        lam_other = lam_hi

    a_side = a_plus if side_plus else a_minus
    mu1 = lam1 + c if side_plus else c - lam1
    _, w1 = _dominant_eig(a_side.T, inner_tol, max_iter, rng)
    denom = float(w1 @ v1)
    if abs(denom) < 1e-12:
        w1 = v1
        denom = float(w1 @ v1)
    deflated = a_side - (mu1 / denom) * np.outer(v1, w1)
    mu2, _ = _dominant_eig(deflated, inner_tol, max_iter, rng)
    lam_deflated = mu2 - c if side_plus else c - mu2

    lam2 = lam_deflated if abs(lam_deflated) >= abs(lam_other) else lam_other
    return lam1, lam2


def pca_2d(x):
    """Center rows and project onto the two leading principal components.

    The sign of each component is fixed so its largest-magnitude entry is
    positive, making the embedding deterministic.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_2d expects at least two rows")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:2]
    components = evecs[:, order]
    for j in range(components.shape[1]):
        col = components[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            components[:, j] = -col
    coords = centered @ components
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    return coords
