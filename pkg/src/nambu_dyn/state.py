"""Extended-phase-space layout and state vectors.

A layout (N, n_dof) describes n_dof independent Nambu N-plets.  The flat
value vector is dof-major: (x1^(0), ..., xN^(0), x1^(1), ..., xN^(n-1)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .poly import VarId, p, q, xvar

__all__ = ["Layout", "NambuState", "x_vars", "classical_vars"]


class Layout(NamedTuple):
    """Multiplet size N (>= 3) and number of degrees of freedom."""

    N: int
    n_dof: int

    @property
    def size(self) -> int:
        return self.N * self.n_dof


def x_vars(layout: Layout) -> tuple[VarId, ...]:
    """Canonical variable order matching the flat state vector."""
    return tuple(
        xvar(i, dof) for dof in range(layout.n_dof) for i in range(1, layout.N + 1)
    )


def classical_vars(n_dof: int) -> tuple[VarId, ...]:
    """Canonical (q0, p0, q1, p1, ...) order for classical state vectors."""
    out: list[VarId] = []
    for dof in range(n_dof):
        out.extend((q(dof), p(dof)))
    return tuple(out)


@dataclass
class NambuState:
    """Values of all multiplet variables at one instant."""

    values: np.ndarray
    layout: Layout
    t: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.layout.size,):
            raise ValueError(
                f"state vector has length {self.values.size}, "
                f"layout {self.layout} needs {self.layout.size}"
            )

    def get(self, i: int, dof: int = 0) -> float:
        """Value of x_i^(dof), with i in 1..N."""
        if not (1 <= i <= self.layout.N) or not (0 <= dof < self.layout.n_dof):
            raise IndexError(f"(i={i}, dof={dof}) outside layout {self.layout}")
        return float(self.values[dof * self.layout.N + (i - 1)])

    def as_dict(self) -> dict[VarId, float]:
        return dict(zip(x_vars(self.layout), self.values.tolist()))
