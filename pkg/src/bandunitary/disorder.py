"""Phase distributions, seeded phase realizations and the ergodic shift.

Phases are drawn from a counter-based source: lattice sites are grouped in
blocks of ``BLOCK`` indices and each block gets its own Philox generator
keyed by ``(seed, stream, block)``.  A phase therefore depends only on
``(distribution, seed, stream, index)``, never on which other indices were
requested or in what order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circle import TWO_PI, ArcSet, wrap

BLOCK = 1024

KINDS = ("uniform", "arc", "atomic", "mixture")


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class PhaseDistribution:
    """A probability measure on the torus.

    ``kind`` selects which of the remaining fields are used.  A mixture puts
    weight ``ac_weight`` on the arc part (or on the full torus when
    ``halfwidth >= pi``) and the rest on the atoms.
    """

    kind: str
    center: float = 0.0
    halfwidth: float = np.pi
    points: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    ac_weight: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "center", wrap(float(self.center)))
        if self.halfwidth < 0:
            raise DomainError("arc halfwidth must be nonnegative")
        if self.kind in ("atomic", "mixture"):
            if not self.points or len(self.points) != len(self.weights):
                raise DomainError("atoms need matching points and weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise DomainError("atom weights must be nonnegative and sum to 1")
            object.__setattr__(self, "points", tuple(float(wrap(p)) for p in self.points))
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if self.kind == "mixture" and not 0.0 <= self.ac_weight <= 1.0:
            raise DomainError("ac weight must lie in [0, 1]")

    @classmethod
    def uniform(cls) -> "PhaseDistribution":
        return cls("uniform")

    @classmethod
    def arc(cls, center: float, halfwidth: float) -> "PhaseDistribution":
        return cls("arc", center=center, halfwidth=halfwidth)

    @classmethod
    def atomic(cls, points: Sequence[float], weights: Sequence[float] | None = None):
        if weights is None:
            weights = [1.0 / len(points)] * len(points)
        return cls("atomic", points=tuple(points), weights=tuple(weights))

    @classmethod
    def mixture(cls, ac_weight, center, halfwidth, points, weights) -> "PhaseDistribution":
        return cls(
            "mixture", center=center, halfwidth=halfwidth,
            points=tuple(points), weights=tuple(weights), ac_weight=ac_weight,
        )

    def support(self) -> ArcSet:
        """Topological support as a union of closed arcs and points."""
        arcs = []
        if self.kind == "uniform":
            return ArcSet.full()
        if self.kind == "arc" or (self.kind == "mixture" and self.ac_weight > 0):
            arcs.append((self.center, self.halfwidth))
        if self.kind == "atomic" or (self.kind == "mixture" and self.ac_weight < 1):
            arcs.extend((p, 0.0) for p, w in zip(self.points, self.weights) if w > 0)
        return ArcSet.from_arcs(arcs)

    def sample_uniforms(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Map two independent U[0,1) streams to phases in [0, 2*pi)."""
        if self.kind == "uniform":
            return wrap(TWO_PI * u)
        if self.kind == "arc":
            return self._arc(u)
        if self.kind == "atomic":
            return self._atoms(u)
        return np.where(v < self.ac_weight, self._arc(u), self._atoms(u))

    def _arc(self, u):
        if self.halfwidth >= np.pi:
            return wrap(TWO_PI * u)
        return wrap(self.center + self.halfwidth * (2.0 * u - 1.0))

    def _atoms(self, u):
        cdf = np.cumsum(self.weights)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, u, side="right")
        return np.asarray(self.points)[np.minimum(idx, len(self.points) - 1)]

    def spec_string(self) -> str:
        return format_distribution(self)


def parse_distribution(spec: str) -> PhaseDistribution:
    """Parse the CLI grammar.

    ``uniform`` | ``arc:<center>,<halfwidth>`` | ``atoms:<p1>@<w1>;...`` |
    ``mix:<acw>,arc:<c>,<h>,atoms:<p1>@<w1>;...``
    """
    spec = spec.strip()
    try:
        if spec == "uniform":
            return PhaseDistribution.uniform()
        if spec.startswith("arc:"):
            c, h = (float(x) for x in spec[4:].split(","))
            return PhaseDistribution.arc(c, h)
        if spec.startswith("atoms:"):
            pts, wts = _parse_atoms(spec[6:])
            return PhaseDistribution.atomic(pts, wts)
        if spec.startswith("mix:"):
            body = spec[4:]
            acw, rest = body.split(",", 1)
            ac_part, atoms_part = rest.split(",atoms:", 1)
            if ac_part == "uniform":
                c, h = 0.0, np.pi
            elif ac_part.startswith("arc:"):
                c, h = (float(x) for x in ac_part[4:].split(","))
            else:
                raise DomainError(f"bad mixture ac part {ac_part!r}")
            pts, wts = _parse_atoms(atoms_part)
            return PhaseDistribution.mixture(float(acw), c, h, pts, wts)
    except DomainError:
        raise
    except ValueError as exc:
        raise DomainError(f"cannot parse distribution {spec!r}: {exc}") from None
    raise DomainError(f"cannot parse distribution {spec!r}")


def _parse_atoms(body: str):
    pts, wts = [], []
    for item in body.split(";"):
        p, w = item.split("@")
        pts.append(float(p))
        wts.append(float(w))
    return pts, wts


def format_distribution(d: PhaseDistribution) -> str:
    atoms = ";".join(f"{p!r}@{w!r}" for p, w in zip(d.points, d.weights))
    if d.kind == "uniform":
        return "uniform"
    if d.kind == "arc":
        return f"arc:{d.center!r},{d.halfwidth!r}"
    if d.kind == "atomic":
        return f"atoms:{atoms}"
    return f"mix:{d.ac_weight!r},arc:{d.center!r},{d.halfwidth!r},atoms:{atoms}"


@dataclass(frozen=True)
class DisorderRealization:
    """Phases theta_k for k = offset, ..., offset + len(phases) - 1."""

    seed: int
    offset: int
    phases: np.ndarray = field(repr=False)

    def __post_init__(self):
        ph = np.array(self.phases, dtype=float)
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)

    @property
    def stop(self) -> int:
        return self.offset + len(self.phases)

    def covers(self, start: int, stop: int) -> bool:
        return self.offset <= start and stop <= self.stop

    def window(self, start: int, stop: int) -> np.ndarray:
        """Phases for lattice indices start..stop-1."""
        if not self.covers(start, stop):
            raise IndexError(
                f"indices [{start}, {stop}) outside realization [{self.offset}, {self.stop})"
            )
        return self.phases[start - self.offset: stop - self.offset]

    def __getitem__(self, k: int) -> float:
        return float(self.window(k, k + 1)[0])

    def with_phase(self, k: int, value: float) -> "DisorderRealization":
        ph = self.phases.copy()
        ph[k - self.offset] = wrap(value)
        return DisorderRealization(self.seed, self.offset, ph)


def _zigzag(b: int) -> int:
    return 2 * b if b >= 0 else -2 * b - 1


def _uniform_block(seed: int, stream: int, block: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, _zigzag(block)))
    return np.random.Generator(np.random.Philox(ss)).random((BLOCK, 2))


def sample_phases(
    dist: PhaseDistribution, seed: int, start: int, stop: int, stream: int = 0
) -> DisorderRealization:
    """i.i.d. phases for lattice indices start..stop-1 (stop exclusive)."""
    if stop <= start:
        raise DomainError(f"empty index range [{start}, {stop})")
    if seed < 0:
        raise DomainError("seed must be a nonnegative 64-bit integer")
    b0, b1 = start // BLOCK, (stop - 1) // BLOCK
    uv = np.concatenate([_uniform_block(seed, stream, b) for b in range(b0, b1 + 1)])
    uv = uv[start - b0 * BLOCK: stop - b0 * BLOCK]
    phases = dist.sample_uniforms(uv[:, 0], uv[:, 1])
    return DisorderRealization(seed, start, phases)


def shift_realization(omega: DisorderRealization, j: int) -> DisorderRealization:
    """Apply the ergodic shift j times: (W^j omega)_k = omega_{k + 2j}.

    The result covers every index whose source index is available.
    """
    if abs(2 * j) >= len(omega.phases):
        raise IndexError(f"shift by {j} leaves no overlap with the realization")
    return DisorderRealization(omega.seed, omega.offset - 2 * j, omega.phases)


@dataclass(frozen=True)
class VerblunskiPhaseSequence:
    """Phases eta_k (k >= 0) of coefficients alpha_k = r exp(i eta_k)."""

    etas: np.ndarray = field(repr=False)
    r: float

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise DomainError(f"Verblunski modulus must lie in (0, 1), got {self.r}")
        e = np.array(self.etas, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "etas", e)

    @property
    def coefficients(self) -> np.ndarray:
        return self.r * np.exp(1j * self.etas)

    def thetas(self) -> np.ndarray:
        """theta_k = eta_k - eta_{k-1} with eta_{-1} = 0, reduced to [0, 2*pi)."""
        return wrap(np.diff(self.etas, prepend=0.0))


def correlated_verblunski(omega: DisorderRealization, r: float) -> VerblunskiPhaseSequence:
    """eta_k = theta_0 + ... + theta_k (mod 2*pi) from a realization covering 0..N-1."""
    if not 0.0 < r < 1.0:
        raise DomainError(f"Verblunski modulus must lie in (0, 1), got {r}")
    if omega.offset > 0 or omega.stop < 1:
        raise IndexError("realization must cover index 0")
    theta = omega.phases[-omega.offset:]
    return VerblunskiPhaseSequence(wrap(np.cumsum(theta)), r)
