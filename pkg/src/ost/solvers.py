"""Closed-form spectral transport solvers on the reduced cost matrix.

Every solver works per frame on a simplex vector v (length M) and a reduced
M x K cost. Transporting onto Dirac targets decouples row-wise, so:

- ost_frame assigns each bin's mass to its cheapest column (an argmin scan);
- ost_entropic_frame replaces the argmin with a row softmax;
- ost_group_frame promotes sparse activations by majorization-minimization,
  re-solving the assignment against a cost augmented with a per-column
  penalty derived from the current column masses;
- ost_combined_frame runs the same MM loop with the entropic inner solve.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .costs import CostMatrix
from .frontend import NormalizedFrames

DEFAULT_MM_ITERATIONS = 10
EMPTY_COLUMN_MASS = 1e-12  # mass floor used when linearizing sqrt at an empty column

VARIANTS = ("ost", "ost_e", "ost_g", "ost_eg")


@dataclass(eq=False)
class TransportPlan:
    """Non-negative M x K plan whose row sums reproduce the input frame."""

    plan: np.ndarray
    row_freqs: np.ndarray
    col_fundamentals: np.ndarray

    def __post_init__(self):
        self.plan = np.asarray(self.plan, dtype=np.float64)
        if self.plan.ndim != 2:
            raise ValueError("plan must be a matrix")
        if np.any(self.plan < 0):
            raise ValueError("plan entries must be non-negative")


@dataclass(eq=False)
class Activations:
    """K x N activation matrix; column n carries the mass of frame n."""

    values: np.ndarray
    frame_hop_seconds: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a K x N matrix")
        if np.any(self.values < 0):
            raise ValueError("activations must be non-negative")
        if self.frame_hop_seconds <= 0:
            raise ValueError("frame_hop_seconds must be positive")


@dataclass
class SolverConfig:
    """Regularization weights and iteration counts for the solver family."""

    lambda_e: float = 0.0
    lambda_g: float = 0.0
    mm_iterations: int = DEFAULT_MM_ITERATIONS
    tie_break: str = "lowest_index"

    def __post_init__(self):
        if self.lambda_e < 0:
            raise ValueError("lambda_e must be non-negative")
        if self.lambda_g < 0:
            raise ValueError("lambda_g must be non-negative")
        if self.mm_iterations < 1:
            raise ValueError("mm_iterations must be >= 1")
        if self.tie_break != "lowest_index":
            raise ValueError("only lowest_index tie-breaking is supported")


def _check_frame(v, cost: CostMatrix) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != cost.values.shape[0]:
        raise ValueError("frame length must match the cost row count")
    if np.any(v < 0):
        raise ValueError("frame entries must be non-negative")
    return v


def _assign(values: np.ndarray, v: np.ndarray):
    """Hard assignment: each row's mass goes to its cheapest column
    (ties break to the lowest index, which is argmin's convention)."""
    labels = np.argmin(values, axis=1)
    k = values.shape[1]
    plan = np.zeros_like(values)
    plan[np.arange(v.size), labels] = v
    h = np.bincount(labels, weights=v, minlength=k)
    return plan, h, labels


def _softmax_labels(values: np.ndarray, lambda_e: float) -> np.ndarray:
    """Row-softmax labelling matrix exp(-c/lambda_e), rows normalized,
    computed with per-row max subtraction."""
    z = -values / lambda_e
    z -= z.max(axis=1, keepdims=True)
    labels = np.exp(z)
    labels /= labels.sum(axis=1, keepdims=True)
    return labels


def _group_penalty_row(h: np.ndarray) -> np.ndarray:
    """Per-column MM penalty 0.5 * ||t_k||_1^(-1/2); empty columns use the
    value at the mass floor instead of the infinite limit."""
    return 0.5 / np.sqrt(np.maximum(h, EMPTY_COLUMN_MASS))


def transport_objective(plan: np.ndarray, values: np.ndarray) -> float:
    """<T, C>."""
    return float(np.sum(plan * values))


def entropy_term(plan: np.ndarray) -> float:
    """Sum of t * log t with the 0 * log 0 = 0 convention."""
    positive = plan[plan > 0]
    return float(np.sum(positive * np.log(positive)))


def group_term(h: np.ndarray) -> float:
    """Sum of sqrt(h_k)."""
    return float(np.sum(np.sqrt(np.maximum(h, 0.0))))


def ost_frame(v, cost: CostMatrix):
    """Unregularized transport onto Dirac targets: row argmin assignment.

    Returns (TransportPlan, h) where h_k collects the mass of all bins
    assigned to column k. O(M*K) for the argmin scan, O(M) given
    precomputed row argmins.
    """
    v = _check_frame(v, cost)
    plan, h, _ = _assign(cost.values, v)
    return _wrap_plan(plan, cost), h


def ost_entropic_frame(v, cost: CostMatrix, lambda_e: float):
    """Entropy-smoothed transport: t_ik = v_i * softmax_k(-c_ik/lambda_e)."""
    if lambda_e <= 0:
        raise ValueError("lambda_e must be positive (use ost_frame for the hard limit)")
    v = _check_frame(v, cost)
    labels = _softmax_labels(cost.values, lambda_e)
    plan = v[:, None] * labels
    h = labels.T @ v
    return _wrap_plan(plan, cost), h


def ost_group_frame(v, cost: CostMatrix, config: SolverConfig, return_trace: bool = False):
    """Group-sparse transport by majorization-minimization.

    Starting from the plain assignment, each iteration linearizes the
    concave penalty sum_k sqrt(h_k) at the current column masses and
    re-solves the assignment against C + lambda_g * R. The penalized
    objective <T, C> + lambda_g * sum_k sqrt(h_k) never increases.

    With return_trace=True also returns the penalized objective after the
    initial solve and after every iteration.
    """
    v = _check_frame(v, cost)
    values = cost.values
    lam = config.lambda_g
    plan, h, _ = _assign(values, v)
    trace = [transport_objective(plan, values) + lam * group_term(h)]
    for _ in range(config.mm_iterations):
        r = _group_penalty_row(h)
        plan, h, _ = _assign(values + lam * r[None, :], v)
        trace.append(transport_objective(plan, values) + lam * group_term(h))
    wrapped = _wrap_plan(plan, cost)
    if return_trace:
        return wrapped, h, np.array(trace)
    return wrapped, h


def ost_combined_frame(v, cost: CostMatrix, config: SolverConfig, return_trace: bool = False):
    """Entropy-smoothed MM: the group loop of ost_group_frame with the
    entropic solve as the inner step. The doubly-penalized objective
    <T, C> + lambda_e * sum t log t + lambda_g * sum sqrt(h_k) is
    non-increasing across outer iterations."""
    if config.lambda_e <= 0:
        raise ValueError("lambda_e must be positive for the combined solver")
    v = _check_frame(v, cost)
    values = cost.values
    lam_e, lam_g = config.lambda_e, config.lambda_g

    def solve(modified):
        labels = _softmax_labels(modified, lam_e)
        plan = v[:, None] * labels
        return plan, labels.T @ v

    def objective(plan, h):
        return (transport_objective(plan, values)
                + lam_e * entropy_term(plan) + lam_g * group_term(h))

    plan, h = solve(values)
    trace = [objective(plan, h)]
    for _ in range(config.mm_iterations):
        r = _group_penalty_row(h)
        plan, h = solve(values + lam_g * r[None, :])
        trace.append(objective(plan, h))
    wrapped = _wrap_plan(plan, cost)
    if return_trace:
        return wrapped, h, np.array(trace)
    return wrapped, h


def _wrap_plan(plan: np.ndarray, cost: CostMatrix) -> TransportPlan:
    return TransportPlan(plan=plan, row_freqs=cost.row_freqs,
                         col_fundamentals=cost.col_freqs)


def unmix(frames: NormalizedFrames, cost: CostMatrix,
          config: SolverConfig = None, variant: str = "ost",
          threads: int = 1) -> Activations:
    """Apply a per-frame solver to every active frame column.

    Masked frames yield zero activation columns. For `ost` the row argmins
    are computed once and reused across frames; `ost_e` is a single
    labelling-matrix product. The MM variants solve frame by frame,
    optionally across a thread pool (results are identical to threads=1
    since frames are independent).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if config is None:
        config = SolverConfig()
    if threads < 1:
        raise ValueError("threads must be >= 1")
    columns = frames.columns
    if columns.shape[0] != cost.values.shape[0]:
        raise ValueError("frame rows must match cost rows")
    k = cost.values.shape[1]
    n = columns.shape[1]
    out = np.zeros((k, n))
    active = np.flatnonzero(frames.active_mask)
    if active.size == 0:
        return Activations(values=out, frame_hop_seconds=frames.frame_hop_seconds)
    v_active = columns[:, active]

    if variant == "ost":
        labels = np.argmin(cost.values, axis=1)
        h = np.zeros((k, active.size))
        np.add.at(h, labels, v_active)
        out[:, active] = h
    elif variant == "ost_e":
        if config.lambda_e <= 0:
            raise ValueError("variant ost_e requires lambda_e > 0")
        labels = _softmax_labels(cost.values, config.lambda_e)
        out[:, active] = labels.T @ v_active
    else:
        solver = ost_group_frame if variant == "ost_g" else ost_combined_frame

        def solve_one(j):
            _, h = solver(v_active[:, j], cost, config)
            return h

        if threads == 1:
            for j in range(active.size):
                out[:, active[j]] = solve_one(j)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for j, h in enumerate(pool.map(solve_one, range(active.size))):
                    out[:, active[j]] = h
    return Activations(values=out, frame_hop_seconds=frames.frame_hop_seconds)
