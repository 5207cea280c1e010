"""Optimal assignment between per-query instance predictions and ground truth.

The assignment minimizes the summed pair cost

    lambda_mask * (lambda_afl * afl + lambda_dice * dice)
        + lambda_cli * (-log p_class[gt class])

over injective matchings of size min(N, M).  The solver is a shortest
augmenting path Hungarian variant plus a refinement pass that returns the
*lexicographically smallest* optimal assignment (lowest prediction index
first, then lowest ground-truth index), so ties never depend on internal
iteration order.  Rectangular problems are padded with a sentinel column or
row block internally.

Unmatched predictions are charged the down-weighted "unclick" classification
term in :func:`total_loss`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import adaptive, losses
from .core import DEFAULT_EPS_CLIP, DimensionError, ParameterError, as_binary_mask, as_prob_map

_TIE_RTOL = 1e-9


@dataclass
class InstancePrediction:
    mask_probs: np.ndarray        # (h, w) probabilities
    click_class_probs: np.ndarray  # (object, unclick), sums to 1

    def __post_init__(self):
        self.mask_probs = as_prob_map(self.mask_probs)
        c = np.asarray(self.click_class_probs, dtype=np.float64)
        if c.shape != (2,):
            raise DimensionError(f"click_class_probs must have shape (2,), got {c.shape}")
        if c.min() < 0.0 or abs(float(c.sum()) - 1.0) > 1e-9:
            raise ParameterError(f"click_class_probs must be a probability pair, got {c}")
        self.click_class_probs = c


@dataclass
class GroundTruthInstance:
    mask: np.ndarray          # (h, w) binary
    click_class: np.ndarray   # one-hot pair (object, unclick)

    def __post_init__(self):
        self.mask = as_binary_mask(self.mask)
        c = np.asarray(self.click_class, dtype=np.float64)
        if c.shape != (2,) or sorted(c.tolist()) != [0.0, 1.0]:
            raise ParameterError(f"click_class must be a one-hot pair, got {c}")
        self.click_class = c

    @property
    def class_index(self) -> int:
        return int(self.click_class.argmax())


@dataclass(frozen=True)
class LossWeights:
    lambda_mask: float = 1.0
    lambda_cli: float = 2.0
    lambda_afl: float = 5.0
    lambda_dice: float = 5.0
    unclick_weight: float = 0.1

    def validate(self) -> "LossWeights":
        for name in ("lambda_mask", "lambda_cli", "lambda_afl", "lambda_dice", "unclick_weight"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")
        return self


@dataclass
class MatchResult:
    assignment: list            # (prediction index, gt index) pairs
    unmatched_predictions: list
    pair_costs: list
    total_cost: float


def _class_nll(probs: np.ndarray, index: int) -> float:
    # clamp keeps the cost finite when a one-hot prediction misses the class
    return float(-np.log(max(float(probs[index]), DEFAULT_EPS_CLIP)))


def pair_cost(pred: InstancePrediction, gt: GroundTruthInstance,
              weights: LossWeights = LossWeights(),
              afl_params: adaptive.AflParams = adaptive.AflParams()) -> float:
    """Matching cost of one (prediction, ground truth) pair."""
    weights.validate()
    mask_out, _ = adaptive.afl(pred.mask_probs, gt.mask, afl_params)
    dice_out = losses.dice(pred.mask_probs, gt.mask)
    mask_term = weights.lambda_afl * mask_out.value + weights.lambda_dice * dice_out.value
    cls_term = _class_nll(pred.click_class_probs, gt.class_index)
    return weights.lambda_mask * mask_term + weights.lambda_cli * cls_term


# ---------------------------------------------------------------------------
# Hungarian solver
# ---------------------------------------------------------------------------

def _solve_square(c: np.ndarray):
    """Shortest-augmenting-path assignment on a square matrix.

    Returns (col_of_row, total, u, v); potentials are 1-indexed with u[0],
    v[0] unused.  Column scans run in ascending order with strict-improvement
    updates, so the algorithm itself is deterministic.
    """
    n = c.shape[0]
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)      # p[j] = row matched to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    total = float(sum(c[i, col_of_row[i]] for i in range(n)))
    return col_of_row, total, u, v


def hungarian(cost) -> MatchResult:
    """Minimum-total-cost injective assignment of size min(N, M).

    Among cost-equal optima (within relative tolerance 1e-9) the returned
    assignment is the lexicographically smallest by (prediction, gt) index.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.size == 0:
        raise DimensionError(f"cost matrix must be nonempty and 2-D, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise ParameterError("cost matrix entries must be finite")
    n_pred, n_gt = c.shape
    side = max(n_pred, n_gt)
    sentinel = (float(np.abs(c).max()) + 1.0) * (side + 1)
    padded = np.full((side, side), sentinel, dtype=np.float64)
    padded[:n_pred, :n_gt] = c

    rows = list(range(side))
    cols = list(range(side))
    pairs: list[tuple[int, int]] = []

    for i in range(n_pred):
        sub = padded[np.ix_(rows, cols)]
        col_of_row, sub_total, u, v = _solve_square(sub)
        tol = _TIE_RTOL * (1.0 + abs(sub_total))
        ri = rows.index(i)
        chosen_local = col_of_row[ri]
        # a lower gt column can replace the solver's pick only if its edge is
        # tight (zero reduced cost) and forcing it keeps the total optimal
        for cj in range(len(cols)):
            if cj >= chosen_local and cols[chosen_local] < n_gt:
                break
            if cols[cj] >= n_gt:
                break  # dummy columns are interchangeable and least preferred
            reduced = sub[ri, cj] - u[ri + 1] - v[cj + 1]
            if abs(reduced) > tol:
                continue
            keep_rows = [k for k in range(len(rows)) if k != ri]
            keep_cols = [k for k in range(len(cols)) if k != cj]
            if keep_rows:
                _, rest, _, _ = _solve_square(sub[np.ix_(keep_rows, keep_cols)])
            else:
                rest = 0.0
            if sub[ri, cj] + rest <= sub_total + tol:
                chosen_local = cj
                break
        chosen = cols[chosen_local]
        if chosen < n_gt:
            pairs.append((i, chosen))
        rows.remove(i)
        cols.remove(chosen)

    matched = {i for i, _ in pairs}
    pair_costs = [float(c[i, j]) for i, j in pairs]
    return MatchResult(
        assignment=pairs,
        unmatched_predictions=[i for i in range(n_pred) if i not in matched],
        pair_costs=pair_costs,
        total_cost=float(sum(pair_costs)),
    )


# ---------------------------------------------------------------------------
# total loss
# ---------------------------------------------------------------------------

def total_loss(preds: list, gts: list,
               weights: LossWeights = LossWeights(),
               afl_params: adaptive.AflParams = adaptive.AflParams()):
    """Matched pair costs plus down-weighted unclick terms for the rest.

    Returns ``(total, match_result, breakdown)``.  ``gts`` may be empty, in
    which case every prediction is charged the unclick term.
    """
    if not preds:
        raise ParameterError("total_loss needs at least one prediction")
    weights.validate()

    if gts:
        cost = np.empty((len(preds), len(gts)), dtype=np.float64)
        for i, pr in enumerate(preds):
            for j, gt in enumerate(gts):
                cost[i, j] = pair_cost(pr, gt, weights, afl_params)
        match = hungarian(cost)
    else:
        match = MatchResult([], list(range(len(preds))), [], 0.0)

    matched_rows = [
        {"pred": i, "gt": j, "cost": float(cost[i, j])} for i, j in match.assignment
    ] if gts else []
    unmatched_rows = []
    for i in match.unmatched_predictions:
        nll = _class_nll(preds[i].click_class_probs, 1)  # index 1 = unclick
        term = weights.unclick_weight * weights.lambda_cli * nll
        unmatched_rows.append({"pred": i, "unclick_nll": nll, "cost": term})

    matched_total = float(sum(r["cost"] for r in matched_rows))
    unclick_total = float(sum(r["cost"] for r in unmatched_rows))
    breakdown = {
        "matched": matched_rows,
        "unmatched": unmatched_rows,
        "matched_total": matched_total,
        "unclick_total": unclick_total,
    }
    return matched_total + unclick_total, match, breakdown
