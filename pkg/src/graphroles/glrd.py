"""Guided role discovery: convex-constrained NMF by projected per-role ALS.

Each sweep recomputes one role at a time: the residual against all other
roles is formed, the unconstrained rank-one least squares solution is
computed in closed form, and the result is projected onto the active
constraint set.  Because the rank-one objective is a scaled distance to the
unconstrained optimum, the projected point is the exact optimum of the
constrained subproblem, so the global objective never increases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import numkit
from .errors import ConfigurationError, DeadRoleWarning, InputError


class ConstraintKind(Enum):
    NONE = "none"
    SPARSITY = "sparsity"
    DIVERSITY = "diversity"
    ALTERNATIVE = "alternative"


class ConstraintTarget(Enum):
    G_COLUMNS = "g_columns"
    F_ROWS = "f_rows"


@dataclass(frozen=True)
class ConstraintSpec:
    """One guidance constraint applied to every targeted role vector.

    ``eps`` bounds the L1 norm (sparsity) or the pairwise inner products
    (diversity, alternativeness).  ``reference`` supplies the prior factor
    for alternativeness and is ignored otherwise.
    """

    kind: ConstraintKind
    target: ConstraintTarget
    eps: float = 0.0
    reference: np.ndarray | None = None

    def __post_init__(self):
        if not self.eps >= 0:
            raise ConfigurationError("constraint eps must be non-negative", module="glrd")
        if self.kind is ConstraintKind.ALTERNATIVE:
            if self.reference is None:
                raise ConfigurationError(
                    "alternative constraints need a reference factor", module="glrd"
                )
            object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))


@dataclass(eq=False)
class RoleModel:
    """Fitted factor pair: role assignments ``g`` (n x r), definitions ``f`` (r x f)."""

    g: np.ndarray
    f: np.ndarray
    objective: float
    relative_error: float
    iterations: int
    seed: int
    node_labels: tuple[str, ...] | None = None
    feature_labels: tuple[str, ...] | None = None
    constraints: tuple[ConstraintSpec, ...] = ()

    @property
    def n_roles(self):
        return self.g.shape[1]

    def __eq__(self, other):
        if not isinstance(other, RoleModel):
            return NotImplemented
        if not (np.array_equal(self.g, other.g) and np.array_equal(self.f, other.f)):
            return False
        if (
            self.objective != other.objective
            or self.relative_error != other.relative_error
            or self.iterations != other.iterations
            or self.seed != other.seed
        ):
            return False
        if self.node_labels != other.node_labels or self.feature_labels != other.feature_labels:
            return False
        if len(self.constraints) != len(other.constraints):
            return False
        for a, b in zip(self.constraints, other.constraints):
            if a.kind != b.kind or a.target != b.target or a.eps != b.eps:
                return False
            if (a.reference is None) != (b.reference is None):
                return False
            if a.reference is not None and not np.array_equal(a.reference, b.reference):
                return False
        return True


def objective(v, g, f):
    """Frobenius norm of the reconstruction residual."""
    return float(np.linalg.norm(v - g @ f))


def residual_excluding(v, g, f, k):
    """Residual of v against every role except role ``k`` (0-based)."""
    r = g.shape[1]
    if not 0 <= k < r:
        raise ConfigurationError(f"role index {k} out of range for r={r}", module="glrd")
    return v - g @ f + np.outer(g[:, k], f[k])


def update_role_vector(residual, fixed_vec, constraints=()):
    """Solve one constrained rank-one subproblem.

    Computes the unconstrained least squares vector against ``fixed_vec``
    and projects it onto the intersection of ``constraints`` (a sequence of
    :class:`numkit.L1Ball` / :class:`numkit.HalfspaceSet`) with the
    non-negative orthant.
    """
    x = numkit.least_squares_col(residual, fixed_vec)
    return project_onto_constraints(x, constraints)


def project_onto_constraints(x, constraints):
    """Project onto the orthant intersected with every constraint set."""
    sets = [c for c in constraints if c is not None]
    if not sets:
        return np.clip(x, 0.0, None)
    if len(sets) == 1 and isinstance(sets[0], numkit.L1Ball):
        return numkit.project_l1_nonneg(x, sets[0].eps)
    rows = []
    for c in sets:
        if isinstance(c, numkit.L1Ball):
            # On the orthant the L1 ball is the halfspace 1.x <= eps.
            if np.isfinite(c.eps):
                rows.append((np.ones_like(x), c.eps))
        elif isinstance(c, numkit.HalfspaceSet):
            for a, e in zip(c.directions, c.eps):
                if np.isfinite(e) and a.any():
                    rows.append((a, e))
        else:
            raise ConfigurationError(f"unsupported constraint set {type(c)!r}", module="glrd")
    if not rows:
        return np.clip(x, 0.0, None)
    return numkit.project_halfspaces_nonneg(x, numkit.HalfspaceSet.from_rows(rows))


def _resolve_constraint_sets(specs, target, matrix, k):
    """Concrete constraint sets for the solve of vector ``k`` of ``matrix``.

    Diversity constrains against the current values of the other vectors;
    alternativeness against every vector of the reference factor.  Vectors
    are columns for the assignment factor and rows for the definition
    factor.
    """
    sets = []
    for spec in specs:
        if spec.target is not target or spec.kind is ConstraintKind.NONE:
            continue
        if spec.kind is ConstraintKind.SPARSITY:
            sets.append(numkit.L1Ball(spec.eps))
            continue
        if spec.kind is ConstraintKind.DIVERSITY:
            if target is ConstraintTarget.G_COLUMNS:
                vecs = [matrix[:, j] for j in range(matrix.shape[1]) if j != k]
            else:
                vecs = [matrix[j] for j in range(matrix.shape[0]) if j != k]
        else:  # ALTERNATIVE
            ref = spec.reference
            if target is ConstraintTarget.G_COLUMNS:
                vecs = [ref[:, j] for j in range(ref.shape[1])]
            else:
                vecs = [ref[j] for j in range(ref.shape[0])]
        rows = [(v, spec.eps) for v in vecs if v.any()]
        if rows:
            sets.append(numkit.HalfspaceSet.from_rows(rows))
    return sets


def _validate_constraints(specs, target, n, r, f):
    for spec in specs:
        if spec.target is not target:
            raise ConfigurationError(
                f"constraint targeted at {spec.target.value} passed in the wrong slot",
                module="glrd",
            )
        if spec.kind is ConstraintKind.ALTERNATIVE:
            ref = spec.reference
            if target is ConstraintTarget.G_COLUMNS and ref.shape[0] != n:
                raise ConfigurationError(
                    f"alternative reference has {ref.shape[0]} rows, expected {n}",
                    module="glrd",
                )
            if target is ConstraintTarget.F_ROWS and ref.shape[1] != f:
                raise ConfigurationError(
                    f"alternative reference has {ref.shape[1]} columns, expected {f}",
                    module="glrd",
                )


def fit(
    v,
    r,
    g_constraints=(),
    f_constraints=(),
    *,
    seed=0,
    max_sweeps=200,
    tol=1e-6,
    on_substep=None,
    node_labels=None,
    feature_labels=None,
):
    """Fit a constrained role model with ``r`` roles.

    Parameters
    ----------
    v : array, shape (n, f)
        Non-negative node-feature matrix.
    r : int
        Number of roles, between 1 and min(n, f).
    g_constraints, f_constraints : sequences of ConstraintSpec
        Guidance on assignment columns and definition rows respectively.
    seed : int
        Seeds the uniform(0, 1) initialization of both factors.
    max_sweeps, tol : int, float
        Stop after ``max_sweeps`` sweeps or when the sweep-over-sweep
        relative objective decrease falls below ``tol``.
    on_substep : callable, optional
        Called as ``on_substep(phase, role, sweep, objective)`` after every
        vector update; used for monotonicity audits.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise InputError("feature matrix must be 2-D", module="glrd")
    if not np.isfinite(v).all():
        raise InputError("feature matrix must be finite", module="glrd")
    if v.size and v.min() < 0:
        raise InputError("feature matrix must be non-negative", module="glrd")
    n, f = v.shape
    if not 1 <= r <= min(n, f):
        raise ConfigurationError(
            f"number of roles must be in [1, {min(n, f)}], got {r}", module="glrd"
        )
    g_constraints = tuple(g_constraints)
    f_constraints = tuple(f_constraints)
    _validate_constraints(g_constraints, ConstraintTarget.G_COLUMNS, n, r, f)
    _validate_constraints(f_constraints, ConstraintTarget.F_ROWS, n, r, f)

    rng = np.random.default_rng(seed)
    g = rng.uniform(size=(n, r))
    fmat = rng.uniform(size=(r, f))
    # Project the initialization into the constraint sets so every iterate is
    # feasible; the per-step reduction argument needs a feasible predecessor.
    for k in range(r):
        g[:, k] = project_onto_constraints(
            g[:, k], _resolve_constraint_sets(g_constraints, ConstraintTarget.G_COLUMNS, g, k)
        )
    for k in range(r):
        fmat[k] = project_onto_constraints(
            fmat[k], _resolve_constraint_sets(f_constraints, ConstraintTarget.F_ROWS, fmat, k)
        )

    norm_v = float(np.linalg.norm(v))
    obj = objective(v, g, fmat)
    dead_roles = set()
    sweeps_done = 0

    for sweep in range(1, max_sweeps + 1):
        prev = obj
        for k in range(r):
            resid = residual_excluding(v, g, fmat, k)

            if not fmat[k].any() and k not in dead_roles:
                dead_roles.add(k)
                warnings.warn(f"role {k} has an all-zero definition and stays dead", DeadRoleWarning)
            sets = _resolve_constraint_sets(g_constraints, ConstraintTarget.G_COLUMNS, g, k)
            g[:, k] = update_role_vector(resid, fmat[k], sets)
            obj = objective(v, g, fmat)
            if on_substep is not None:
                on_substep("g", k, sweep, obj)

            if not g[:, k].any() and k not in dead_roles:
                dead_roles.add(k)
                warnings.warn(f"role {k} has an all-zero assignment and stays dead", DeadRoleWarning)
            sets = _resolve_constraint_sets(f_constraints, ConstraintTarget.F_ROWS, fmat, k)
            fmat[k] = update_role_vector(resid.T, g[:, k], sets)
            obj = objective(v, g, fmat)
            if on_substep is not None:
                on_substep("f", k, sweep, obj)
        sweeps_done = sweep
        if prev == 0.0 or obj == 0.0:
            break
        if (prev - obj) / prev < tol:
            break

    return RoleModel(
        g=g,
        f=fmat,
        objective=obj,
        relative_error=obj / norm_v if norm_v > 0 else 0.0,
        iterations=sweeps_done,
        seed=seed,
        node_labels=tuple(node_labels) if node_labels is not None else None,
        feature_labels=tuple(feature_labels) if feature_labels is not None else None,
        constraints=g_constraints + f_constraints,
    )


def fit_alternative(v, r, prior, eps_g=None, eps_f=None, seed=0, **fit_kwargs):
    """Fit roles constrained away from a prior solution.

    ``eps_g`` bounds inner products of new assignment columns against every
    prior assignment column; ``eps_f`` does the same for definition rows.
    Passing ``None`` leaves that side unconstrained; with eps 0 the new
    definition rows are support-disjoint from every prior row.
    """
    if eps_g is None and eps_f is None:
        raise ConfigurationError("fit_alternative needs eps_g and/or eps_f", module="glrd")
    g_constraints = []
    f_constraints = []
    if eps_g is not None:
        g_constraints.append(
            ConstraintSpec(
                ConstraintKind.ALTERNATIVE, ConstraintTarget.G_COLUMNS, eps_g, reference=prior.g
            )
        )
    if eps_f is not None:
        f_constraints.append(
            ConstraintSpec(
                ConstraintKind.ALTERNATIVE, ConstraintTarget.F_ROWS, eps_f, reference=prior.f
            )
        )
    return fit(v, r, g_constraints, f_constraints, seed=seed, **fit_kwargs)


def max_constraint_violation(model, v=None):
    """Largest violation of the model's recorded constraints.

    For sparsity this is the L1 overshoot of any targeted vector; for
    diversity and alternativeness the overshoot of any pairwise product.
    """
    worst = 0.0
    for spec in model.constraints:
        if spec.target is ConstraintTarget.G_COLUMNS:
            vecs = model.g.T
            ref = spec.reference.T if spec.reference is not None else None
        else:
            vecs = model.f
            ref = spec.reference if spec.reference is not None else None
        if spec.kind is ConstraintKind.SPARSITY:
            for vec in vecs:
                worst = max(worst, float(np.abs(vec).sum() - spec.eps))
        elif spec.kind is ConstraintKind.DIVERSITY:
            for i in range(len(vecs)):
                for j in range(len(vecs)):
                    if i != j:
                        worst = max(worst, float(vecs[i] @ vecs[j] - spec.eps))
        elif spec.kind is ConstraintKind.ALTERNATIVE:
            for vec in vecs:
                for rvec in ref:
                    worst = max(worst, float(vec @ rvec - spec.eps))
    return worst
