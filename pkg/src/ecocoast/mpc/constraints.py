"""Minimum-off-time constraints on the binary signal across receding-horizon seams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class BinaryHistory:
    """The last ``d_min`` applied signals, oldest first."""

    recent: tuple

    def __post_init__(self):
        recent = tuple(int(s) for s in self.recent)
        if not recent:
            raise ValidationError("history needs at least one entry")
        if any(s not in (0, 1) for s in recent):
            raise ValidationError("history entries must be 0 or 1")
        object.__setattr__(self, "recent", recent)

    @classmethod
    def all_on(cls, d_min: int) -> "BinaryHistory":
        return cls((1,) * d_min)

    def __len__(self) -> int:
        return len(self.recent)

    @property
    def last(self) -> int:
        return self.recent[-1]

    def push(self, signal: int) -> "BinaryHistory":
        return BinaryHistory(self.recent[1:] + (int(signal),))


@dataclass(frozen=True)
class MinOffConstraints:
    """Rows ``A @ z <= b`` over the horizon binaries.

    Each row is ``z[tau] + z[j-1] - z[j] <= 1`` on the extended vector
    ``[history, horizon]`` with history entries folded into ``b``.
    """

    A: np.ndarray
    b: np.ndarray
    horizon: int

    def satisfies(self, seq) -> bool:
        seq = np.asarray(seq, dtype=float)
        if len(seq) != self.horizon:
            raise ValidationError(f"expected {self.horizon} binaries, got {len(seq)}")
        return bool(np.all(self.A @ seq <= self.b + 1e-9)) if len(self.b) else True

    def bounds_feasible(self, lo, hi) -> bool:
        """Whether some row is violated by every completion within ``[lo, hi]``."""
        if not len(self.b):
            return True
        least = np.where(self.A > 0, self.A * lo, self.A * hi).sum(axis=1)
        return bool(np.all(least <= self.b + 1e-9))

    def propagate(self, lo, hi):
        """Tighten integer bounds ``lo <= z <= hi`` implied by the rows.

        Returns new ``(lo, hi)`` or ``None`` when the box holds no feasible
        assignment according to single-row reasoning.
        """
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        if not len(self.b):
            return lo, hi
        pos = self.A > 0
        neg = self.A < 0
        while True:
            least = np.where(pos, self.A * lo, self.A * hi).sum(axis=1)
            if np.any(least > self.b + 1e-9):
                return None
            # coefficients are +-1, so a row with less than unit slack pins its free variables
            tight = (self.b - least) < 1.0 - 1e-9
            free = lo != hi
            down = free & pos[tight].any(axis=0)
            up = free & neg[tight].any(axis=0)
            if not (down.any() or up.any()):
                break
            hi[down] = lo[down]
            lo[up] = hi[up]
        return lo, hi


def min_off_constraints(history: BinaryHistory, horizon: int, d_min: int) -> MinOffConstraints:
    """Linear rows keeping every 1->0 switch followed by at least ``d_min`` zeros."""
    if d_min < 1:
        raise ValidationError("d_min must be >= 1")
    if horizon < 0:
        raise ValidationError("horizon must be >= 0")
    hist = list(history.recent)
    h = len(hist)
    total = h + horizon
    rows = {}
    for j in range(1, total):
        for tau in range(j + 1, min(j + d_min - 1, total - 1) + 1):
            coef = np.zeros(horizon)
            const = 0.0
            for idx, sign in ((tau, 1.0), (j - 1, 1.0), (j, -1.0)):
                if idx >= h:
                    coef[idx - h] += sign
                else:
                    const += sign * hist[idx]
            if not np.any(coef):
                continue  # lies wholly in the past
            rhs = 1.0 - const
            if np.where(coef > 0, coef, 0.0).sum() <= rhs:
                continue  # can never bind
            rows.setdefault((tuple(coef), rhs), None)
    if rows:
        A = np.array([k[0] for k in rows])
        b = np.array([k[1] for k in rows])
    else:
        A = np.zeros((0, horizon))
        b = np.zeros(0)
    return MinOffConstraints(A, b, horizon)


def forced_zeros(history: BinaryHistory, d_min: int) -> int:
    """Number of leading horizon steps that must stay off to finish an off-run."""
    hist = history.recent
    h = len(hist)
    need = 0
    for j in range(1, h):
        if hist[j - 1] == 1 and hist[j] == 0:
            need = max(need, j + d_min - h)
    return need


def feasible_sequences(history: BinaryHistory, horizon: int, d_min: int):
    """Yield every admissible binary sequence, in lexicographic order of (1, 0) choices.

    Ones are tried first so the all-on-where-possible sequence comes first.
    """
    start = forced_zeros(history, d_min)
    seq = [0] * horizon

    def rec(i, prev, remaining):
        if i == horizon:
            yield tuple(seq)
            return
        if remaining > 0:
            seq[i] = 0
            yield from rec(i + 1, 0, max(remaining - 1, d_min - 1 if prev == 1 else 0))
            return
        seq[i] = 1
        yield from rec(i + 1, 1, 0)
        seq[i] = 0
        yield from rec(i + 1, 0, d_min - 1 if prev == 1 else 0)

    yield from rec(0, history.last, start)


def default_sequence(history: BinaryHistory, horizon: int, d_min: int) -> tuple:
    """The admissible sequence that switches on as early as possible."""
    return next(feasible_sequences(history, horizon, d_min))
