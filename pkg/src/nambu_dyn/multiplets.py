"""Multiplet definitions, induced-constraint verification, and lifting.

A multiplet maps each degree of freedom's canonical pair (q, p) to N
extended variables x_i(q, p) together with the N-2 constraint functions
G_c(x_1..x_N) that make Hamiltonian flow expressible as Nambu flow.  The
consistency checker certifies stored constraints numerically; it does not
integrate the defining conditions to discover new ones.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass
from itertools import combinations, permutations
from math import factorial
from typing import Mapping, Sequence

import numpy as np

from .brackets import _det_poly, _partial, sample_assignments
from .poly import Poly, VarId, parse_poly, p, q, xvar
from .state import Layout

__all__ = [
    "MultipletDef",
    "ConsistencyReport",
    "MalformedMultipletError",
    "UnliftableMonomialError",
    "AmbiguousLiftWarning",
    "TRIPLET_QQPP_QP",
    "QUARTET_QP_Q2P2",
    "builtin_multiplets",
    "multiplet_from_strings",
    "verify_consistency",
    "lift_to_multiplet",
    "classical_image",
    "consistency_to_csv",
]

DEFAULT_CONSISTENCY_TOL = 1e-9
DEFAULT_CONSISTENCY_SAMPLES = 50


class MalformedMultipletError(ValueError):
    """Definitions or constraints do not fit the declared N and n_dof."""


class UnliftableMonomialError(ValueError):
    """A (q, p) monomial has no representation in the multiplet variables."""


class AmbiguousLiftWarning(UserWarning):
    """Several equal-degree generators could absorb a monomial."""


def _pb_single_dof(a: Poly, b: Poly, dof: int) -> Poly:
    qv, pv = q(dof), p(dof)
    return _partial(a, qv) * _partial(b, pv) - _partial(a, pv) * _partial(b, qv)


@dataclass(frozen=True)
class MultipletDef:
    """Per-dof variable definitions x_i(q, p) and constraints G_c(x)."""

    name: str
    N: int
    n_dof: int
    defs: tuple[tuple[Poly, ...], ...]
    constraints: tuple[tuple[Poly, ...], ...]

    def __post_init__(self) -> None:
        if self.N < 3:
            raise MalformedMultipletError("a Nambu multiplet needs N >= 3")
        if self.n_dof < 1:
            raise MalformedMultipletError("n_dof must be >= 1")
        if len(self.defs) != self.n_dof or len(self.constraints) != self.n_dof:
            raise MalformedMultipletError("defs/constraints must list every dof")
        for dof in range(self.n_dof):
            if len(self.defs[dof]) != self.N:
                raise MalformedMultipletError(
                    f"dof {dof}: expected {self.N} variable definitions"
                )
            if len(self.constraints[dof]) != self.N - 2:
                raise MalformedMultipletError(
                    f"dof {dof}: expected {self.N - 2} constraints"
                )
            allowed_qp = {q(dof), p(dof)}
            for d in self.defs[dof]:
                if not d.variables() <= allowed_qp:
                    raise MalformedMultipletError(
                        f"dof {dof}: definitions must use only q{dof}, p{dof}"
                    )
            allowed_x = {xvar(i, dof) for i in range(1, self.N + 1)}
            for g in self.constraints[dof]:
                if not g.variables() <= allowed_x:
                    raise MalformedMultipletError(
                        f"dof {dof}: constraints must use only that dof's x variables"
                    )
            nonzero = sum(
                1
                for i, j in combinations(range(self.N), 2)
                if not _pb_single_dof(self.defs[dof][i], self.defs[dof][j], dof).is_zero
            )
            if nonzero < self.N - 1:
                raise MalformedMultipletError(
                    f"dof {dof}: fewer than N-1 nonvanishing pairwise brackets"
                )

    @property
    def layout(self) -> Layout:
        return Layout(self.N, self.n_dof)

    def with_n_dof(self, n_dof: int) -> "MultipletDef":
        """Per-dof copies of a single-dof template."""
        if self.n_dof != 1:
            raise MalformedMultipletError("with_n_dof expects a single-dof template")
        if n_dof == 1:
            return self
        defs = []
        constraints = []
        for dof in range(n_dof):
            qp_map = {q(0): Poly.var(q(dof)), p(0): Poly.var(p(dof))}
            x_map = {
                xvar(i, 0): Poly.var(xvar(i, dof)) for i in range(1, self.N + 1)
            }
            defs.append(tuple(d.subs(qp_map) for d in self.defs[0]))
            constraints.append(tuple(g.subs(x_map) for g in self.constraints[0]))
        return MultipletDef(self.name, self.N, n_dof, tuple(defs), tuple(constraints))

    def summed_constraints(self) -> tuple[Poly, ...]:
        """G_c summed over dofs, the Nambu Hamiltonians for many dofs."""
        out = []
        for c in range(self.N - 2):
            total = Poly.zero()
            for dof in range(self.n_dof):
                total = total + self.constraints[dof][c]
            out.append(total)
        return tuple(out)


def _quadratic_triplet() -> MultipletDef:
    qq = Poly.var(q(0)) * Poly.var(q(0))
    pp = Poly.var(p(0)) * Poly.var(p(0))
    qp = Poly.var(q(0)) * Poly.var(p(0))
    x1, x2, x3 = (Poly.var(xvar(i, 0)) for i in (1, 2, 3))
    g = 2.0 * x3 * x3 - 2.0 * x1 * x2
    return MultipletDef("triplet", 3, 1, ((qq, pp, qp),), ((g,),))


def _quartet() -> MultipletDef:
    qv = Poly.var(q(0))
    pv = Poly.var(p(0))
    x1, x2, x3, x4 = (Poly.var(xvar(i, 0)) for i in (1, 2, 3, 4))
    g1 = x3 - x1 * x1
    g2 = x4 - x2 * x2
    return MultipletDef(
        "quartet", 4, 1, ((qv, pv, qv * qv, pv * pv),), ((g1, g2),)
    )


TRIPLET_QQPP_QP = _quadratic_triplet()
QUARTET_QP_Q2P2 = _quartet()


def builtin_multiplets() -> dict[str, MultipletDef]:
    """Catalog of built-in single-dof multiplet templates."""
    return {"triplet": TRIPLET_QQPP_QP, "quartet": QUARTET_QP_Q2P2}


def multiplet_from_strings(
    name: str,
    defs: Sequence[str],
    constraints: Sequence[str],
    n_dof: int = 1,
) -> MultipletDef:
    """Build a single-dof multiplet from textual Polys, then replicate it."""
    template = MultipletDef(
        name,
        len(defs),
        1,
        (tuple(parse_poly(s) for s in defs),),
        (tuple(parse_poly(s) for s in constraints),),
    )
    return template.with_n_dof(n_dof)


# --------------------------------------------------------------------------
# Classical image
# --------------------------------------------------------------------------


def classical_image(m: MultipletDef, point: Mapping[VarId, float]) -> np.ndarray:
    """Evaluate x_i(q, p) for all dofs; dof-major flat vector."""
    out = np.empty(m.N * m.n_dof, dtype=np.float64)
    k = 0
    for dof in range(m.n_dof):
        for d in m.defs[dof]:
            out[k] = d.eval(point)
            k += 1
    return out


# --------------------------------------------------------------------------
# Consistency conditions
# --------------------------------------------------------------------------


@dataclass
class ConsistencyReport:
    """Worst residual of one consistency condition over the sample set."""

    dof: int
    i: int
    j: int
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def consistency_to_csv(reports: Sequence[ConsistencyReport]) -> str:
    out = io.StringIO()
    out.write("dof,i,j,max_residual,pass\n")
    for r in reports:
        out.write(f"{r.dof},{r.i},{r.j},{r.max_residual!r},{int(r.passed)}\n")
    return out.getvalue()


def _levi_civita(indices: Sequence[int]) -> int:
    seen = set(indices)
    if len(seen) != len(indices):
        return 0
    inversions = 0
    for a in range(len(indices)):
        for b in range(a + 1, len(indices)):
            if indices[a] > indices[b]:
                inversions += 1
    return -1 if inversions % 2 else 1


def _constraint_contraction(
    constraints: Sequence[Poly], vs: Sequence[VarId], i: int, j: int
) -> Poly:
    """(1/(N-2)!) eps_{i j k...} times the constraint Jacobian, as a Poly."""
    n = len(vs)
    rest = [k for k in range(n) if k != i and k != j]
    total = Poly.zero()
    for perm in permutations(rest):
        eps = _levi_civita((i, j) + perm)
        rows = [[_partial(g, vs[k]) for k in perm] for g in constraints]
        det = _det_poly(rows)
        total = total + (det if eps > 0 else -det)
    return total * (1.0 / factorial(n - 2))


def verify_consistency(
    m: MultipletDef,
    samples: int = DEFAULT_CONSISTENCY_SAMPLES,
    tolerance: float = DEFAULT_CONSISTENCY_TOL,
    seed: int | None = None,
) -> list[ConsistencyReport]:
    """Check, per dof and variable pair, that the constraint Jacobians
    reproduce the Poisson brackets of the defining variables at random
    (q, p) points."""
    kw = {} if seed is None else {"seed": seed}
    reports = []
    for dof in range(m.n_dof):
        vs = [xvar(i, dof) for i in range(1, m.N + 1)]
        points = sample_assignments([q(dof), p(dof)], samples, **kw)
        images = []
        for pt in points:
            image = {v: d.eval(pt) for v, d in zip(vs, m.defs[dof])}
            images.append(image)
        for i, j in combinations(range(m.N), 2):
            lhs_poly = _constraint_contraction(m.constraints[dof], vs, i, j)
            rhs_poly = _pb_single_dof(m.defs[dof][i], m.defs[dof][j], dof)
            worst = 0.0
            for pt, image in zip(points, images):
                r = abs(lhs_poly.eval(image) - rhs_poly.eval(pt))
                if r > worst:
                    worst = r
            reports.append(ConsistencyReport(dof, i + 1, j + 1, worst, tolerance))
    return reports


# --------------------------------------------------------------------------
# Lifting (q, p) observables into multiplet variables
# --------------------------------------------------------------------------


def _generator_table(m: MultipletDef, dof: int) -> list[tuple[int, int, int]]:
    """(index, q-exponent, p-exponent) for each generator; monic monomials only."""
    table = []
    for idx, d in enumerate(m.defs[dof]):
        terms = list(d.terms.items())
        if len(terms) != 1 or terms[0][1] != 1.0:
            raise MalformedMultipletError(
                "lifting requires monic monomial generators"
            )
        mono = dict(terms[0][0])
        a = mono.get(q(dof), 0)
        b = mono.get(p(dof), 0)
        table.append((idx, a, b))
    return table


def lift_to_multiplet(f: Poly, m: MultipletDef, dof: int = 0) -> Poly:
    """Rewrite a (q, p) polynomial in multiplet variables, preferring the
    highest-degree generators.

    Mixed q-p monomials are absorbed only by mixed generators; writing them
    as products of pure-q and pure-p variables would misrepresent the
    corresponding operator expectation, so such monomials are rejected.
    """
    allowed = {q(dof), p(dof)}
    if not f.variables() <= allowed:
        raise UnliftableMonomialError(
            f"polynomial involves variables outside dof {dof}'s (q, p)"
        )
    gens = _generator_table(m, dof)
    out = Poly.zero()
    for mono, coeff in f.terms.items():
        powers = dict(mono)
        a = powers.get(q(dof), 0)
        b = powers.get(p(dof), 0)
        lifted: dict[VarId, int] = {}
        while a > 0 or b > 0:
            if a > 0 and b > 0:
                candidates = [
                    (idx, ga, gb) for idx, ga, gb in gens
                    if ga > 0 and gb > 0 and ga <= a and gb <= b
                ]
            elif a > 0:
                candidates = [
                    (idx, ga, gb) for idx, ga, gb in gens
                    if gb == 0 and 0 < ga <= a
                ]
            else:
                candidates = [
                    (idx, ga, gb) for idx, ga, gb in gens
                    if ga == 0 and 0 < gb <= b
                ]
            if not candidates:
                bad = format_monomial(mono)
                raise UnliftableMonomialError(
                    f"monomial {bad} cannot be expressed in multiplet {m.name!r}"
                )
            best_deg = max(ga + gb for _, ga, gb in candidates)
            top = [c for c in candidates if c[1] + c[2] == best_deg]
            if len(top) > 1:
                warnings.warn(
                    f"multiple degree-{best_deg} lifts exist for {format_monomial(mono)}; "
                    f"using the lowest-index generator",
                    AmbiguousLiftWarning,
                    stacklevel=2,
                )
            idx, ga, gb = min(top)
            a -= ga
            b -= gb
            v = xvar(idx + 1, dof)
            lifted[v] = lifted.get(v, 0) + 1
        out = out + Poly.monomial(lifted, coeff)
    return out


def format_monomial(mono) -> str:
    return str(Poly({mono: 1.0}))
