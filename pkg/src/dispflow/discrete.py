"""Discrete displacement correction: exhaustive row-jitter search and a
greedy block heuristic for column displacements.

Conventions follow the field layout values[i1, i2]: a "row" is an x2-line
(fixed i2, shifted along i1 by jitter d2(x2)); a "column" is an x1-line
(fixed i1, displaced by d1(x1))."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField


class DiscreteError(ValueError):
    pass


@dataclass(frozen=True)
class IntShiftField:
    """Per-line integer displacements with |d_j| <= bound."""

    shifts: np.ndarray
    bound: int

    def __post_init__(self):
        s = np.asarray(self.shifts, dtype=np.int64)
        if np.any(np.abs(s) > self.bound):
            raise DiscreteError("shift exceeds bound")
        object.__setattr__(self, "shifts", s)

    def to_csv(self) -> str:
        lines = ["index,shift"]
        lines += [f"{j},{int(s)}" for j, s in enumerate(self.shifts)]
        return "\n".join(lines) + "\n"


def shift_line(v: np.ndarray, s: int) -> np.ndarray:
    """Shift a 1D array by s samples (content moves toward higher indices
    for s > 0), filling exposed entries by edge replication."""
    if s == 0:
        return v.copy()
    out = np.empty_like(v)
    if s > 0:
        out[s:] = v[:-s]
        out[:s] = v[0]
    else:
        out[:s] = v[-s:]
        out[s:] = v[-1]
    return out


def _candidate_shifts(M: int):
    # ties break toward smaller |s|, then toward negative s
    return sorted(range(-M, M + 1), key=lambda s: (abs(s), s))


def jitter_correct_rows(
    img: ScalarField, M: int, k: int = 1
) -> tuple[ScalarField, IntShiftField]:
    """Sequential exhaustive search over per-row shifts in [-M, M].

    Rows (x2-lines) are processed in order; each row takes the shift that
    minimizes the squared order-k finite difference against the already
    corrected predecessor row(s).  O(M * n * width) total work.
    """
    if M < 0:
        raise DiscreteError("M must be non-negative")
    if k not in (1, 2):
        raise DiscreteError("k must be 1 or 2")
    if M >= img.n1:
        raise DiscreteError("M must be smaller than the row length")
    v = img.values
    n_rows = img.n2
    out = np.empty_like(v)
    shifts = np.zeros(n_rows, dtype=np.int64)
    out[:, 0] = v[:, 0]
    for j in range(1, n_rows):
        best, best_cost = 0, None
        for s in _candidate_shifts(M):
            cand = shift_line(v[:, j], s)
            if k == 1 or j == 1:
                d = cand - out[:, j - 1]
            else:
                d = cand - 2.0 * out[:, j - 1] + out[:, j - 2]
            cost = float(d @ d)
            if best_cost is None or cost < best_cost - 1e-12 * max(best_cost, 1.0):
                best, best_cost = s, cost
        shifts[j] = best
        out[:, j] = shift_line(v[:, j], best)
    return img.with_values(out), IntShiftField(shifts, M)


def column_cost(values: np.ndarray, k: int) -> float:
    """Squared order-k difference across columns (x1-lines)."""
    if k == 1:
        d = values[1:] - values[:-1]
    else:
        d = values[2:] - 2.0 * values[1:-1] + values[:-2]
    return float(np.sum(d * d))


def block_assign_columns(
    img: ScalarField, M: int, k: int = 1
) -> tuple[ScalarField, IntShiftField]:
    """Greedy best-swap reordering of columns within width-M blocks.

    Heuristic for the column-displacement assignment problem: within each
    block, repeatedly apply the swap that most reduces the order-k
    column-difference cost until no improving swap remains.  The objective
    never increases; the result is deterministic.
    """
    if M < 1:
        raise DiscreteError("M must be at least 1")
    if M > img.n1:
        raise DiscreteError("M must not exceed the column count")
    v = img.values.copy()
    n = img.n1
    perm = np.arange(n)
    for start in range(0, n, M):
        stop = min(start + M, n)
        improving = True
        while improving:
            improving = False
            best_pair, best_gain = None, 0.0
            base = column_cost(v, k)
            for a, b in itertools.combinations(range(start, stop), 2):
                v[[a, b]] = v[[b, a]]
                gain = base - column_cost(v, k)
                v[[a, b]] = v[[b, a]]
                if gain > best_gain + 1e-12 * max(base, 1.0):
                    best_gain, best_pair = gain, (a, b)
            if best_pair is not None:
                a, b = best_pair
                v[[a, b]] = v[[b, a]]
                perm[[a, b]] = perm[[b, a]]
                improving = True
    shifts = perm - np.arange(n)
    return img.with_values(v), IntShiftField(shifts, M)
