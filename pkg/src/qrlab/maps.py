"""Catalog of quasiregular self-maps of the extended space with exact inverses.

Every map works on point arrays of shape ``(N, n)`` (inf rows are infinity)
and offers

* ``eval_array``: closed-form evaluation,
* ``preimage_slots``: all ``degree`` preimages as roots with repetition, so a
  point of local index i occupies i slots,
* ``jacobian_array``: the analytic derivative matrix (used as an oracle for
  finite differences),
* ``local_index_array``: catalog local indices.

Planar maps act on the complex plane identified with R^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DimensionMismatchError, MapConfigError, NearBranchPointError
from .extended_space import (ExtendedPoint, as_point_array, infinite_rows,
                             normalize_infinity)

DEFAULT_STEP = 1e-5


@dataclass(frozen=True)
class BranchPoint:
    point: ExtendedPoint
    index: int


@dataclass(frozen=True)
class PreimageSet:
    entries: tuple[tuple[ExtendedPoint, int], ...]

    @property
    def points(self) -> list[ExtendedPoint]:
        return [p for p, _ in self.entries]

    @property
    def multiplicity(self) -> int:
        return sum(i for _, i in self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class DilatationEstimate:
    K_O_est: float
    K_I_est: float
    jacobian: float
    singular_values: tuple[float, ...]


# -- complex helpers ---------------------------------------------------------

def rows_to_complex(arr: np.ndarray) -> np.ndarray:
    arr = np.atleast_2d(arr)
    inf = infinite_rows(arr)
    z = np.where(inf, 0.0, arr[:, 0]) + 1j * np.where(inf, 0.0, arr[:, 1])
    z[inf] = complex(np.inf, 0.0)
    return z


def complex_to_rows(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.stack([z.real, z.imag], axis=-1)
    bad = ~np.isfinite(z)
    out[bad] = np.inf
    return out


def _holomorphic_matrix(g: np.ndarray) -> np.ndarray:
    """Real 2x2 matrices of multiplication by the complex numbers g."""
    m = np.empty(g.shape + (2, 2))
    m[..., 0, 0] = g.real
    m[..., 0, 1] = -g.imag
    m[..., 1, 0] = g.imag
    m[..., 1, 1] = g.real
    return m


def _roots(w: np.ndarray, d: int) -> np.ndarray:
    """All d-th roots of each entry of w, shape (N, d); roots of 0 are 0."""
    mod = np.abs(w) ** (1.0 / d)
    arg = np.angle(w)
    j = np.arange(d)
    roots = mod[:, None] * np.exp(1j * (arg[:, None] + 2 * np.pi * j[None, :]) / d)
    roots[w == 0] = 0.0
    return roots


# -- base class --------------------------------------------------------------

class QRMap:
    """A quasiregular self-map of the extended space from the catalog."""

    family: str = ""
    dim: int = 2
    degree: int = 1
    inner_dilatation: float = 1.0
    outer_dilatation: float = 1.0
    polynomial_type: bool = True

    # subclasses implement these on finite rows / full arrays
    def _eval_finite(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _slots_finite(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_index_array(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def branch_distance(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance from finite rows to the finite part of the branch set."""
        raise NotImplementedError

    @property
    def branch_points(self) -> tuple[BranchPoint, ...]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    # -- shared machinery --

    def _check(self, arr) -> np.ndarray:
        arr = as_point_array(arr)
        if arr.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"{self.name} acts on dimension {self.dim}, got {arr.shape[1]}")
        return arr

    def eval_array(self, x) -> np.ndarray:
        x = self._check(x)
        out = np.full_like(x, np.inf)
        fin = ~infinite_rows(x)
        if fin.any():
            with np.errstate(over="ignore", invalid="ignore"):
                out[fin] = self._eval_finite(x[fin])
        return normalize_infinity(out)

    def preimage_slots(self, y) -> np.ndarray:
        """Preimages of every row, shape (N, degree, n), repeated by local index."""
        y = self._check(y)
        out = np.full((y.shape[0], self.degree, self.dim), np.inf)
        fin = ~infinite_rows(y)
        if fin.any():
            with np.errstate(over="ignore", invalid="ignore"):
                out[fin] = self._slots_finite(y[fin])
        return normalize_infinity(out.reshape(-1, self.dim)).reshape(out.shape)

    def eval(self, x: ExtendedPoint) -> ExtendedPoint:
        return ExtendedPoint.from_row(self.eval_array(x)[0])

    def preimages(self, y: ExtendedPoint) -> PreimageSet:
        slots = self.preimage_slots(y)[0]
        distinct = np.unique(slots, axis=0)
        index = self.local_index_array(distinct)
        entries = tuple((ExtendedPoint.from_row(r), int(i)) for r, i in zip(distinct, index))
        if sum(i for _, i in entries) != self.degree:
            # exact root formulas put all slots of a branch point on the same row
            counts = [int((slots == r).all(axis=1).sum()) for r in distinct]
            entries = tuple((p, c) for (p, _), c in zip(entries, counts))
        return PreimageSet(entries)

    def local_index(self, x: ExtendedPoint) -> int:
        return int(self.local_index_array(x.to_row()[None, :])[0])

    @property
    def name(self) -> str:
        args = ", ".join(f"{v}" for k, v in self.to_dict().items() if k != "family")
        return f"{type(self).__name__}({args})"

    def __repr__(self):
        return self.name

    def __eq__(self, other):
        return isinstance(other, QRMap) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(sorted((k, str(v)) for k, v in self.to_dict().items())))


class _PlanarMap(QRMap):
    dim = 2

    def _eval_finite(self, x):
        return complex_to_rows(self._eval_complex(rows_to_complex(x)))

    def _slots_finite(self, y):
        roots = self._slots_complex(rows_to_complex(y))
        return complex_to_rows(roots)

    def _eval_complex(self, z):
        raise NotImplementedError

    def _slots_complex(self, w):
        raise NotImplementedError


class PowerMap(_PlanarMap):
    """z -> z^d."""

    family = "power"

    def __init__(self, d: int):
        if int(d) != d or d < 2:
            raise MapConfigError(f"PowerMap needs an integer d >= 2, got {d!r}")
        self.d = int(d)
        self.degree = self.d

    def _eval_complex(self, z):
        return z ** self.d

    def _slots_complex(self, w):
        return _roots(w, self.d)

    def jacobian_array(self, x):
        z = rows_to_complex(self._check(x))
        return _holomorphic_matrix(self.d * z ** (self.d - 1))

    def local_index_array(self, x):
        x = self._check(x)
        at_branch = infinite_rows(x) | (np.where(np.isfinite(x), x, 1.0) == 0).all(axis=1)
        return np.where(at_branch, self.d, 1)

    def branch_distance(self, x):
        return np.linalg.norm(self._check(x), axis=1)

    @property
    def branch_points(self):
        return (BranchPoint(ExtendedPoint.finite(0.0, 0.0), self.d),
                BranchPoint(ExtendedPoint.infinity(2), self.d))

    def to_dict(self):
        return {"family": self.family, "d": self.d}


class Quadratic(_PlanarMap):
    """z -> z^2 + c."""

    family = "quadratic"
    degree = 2

    def __init__(self, c: complex = 0.0):
        c = complex(c)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise MapConfigError(f"Quadratic needs a finite parameter, got {c!r}")
        self.c = c

    def _eval_complex(self, z):
        return z * z + self.c

    def _slots_complex(self, w):
        r = np.sqrt(w - self.c)
        return np.stack([r, -r], axis=1)

    def jacobian_array(self, x):
        return _holomorphic_matrix(2.0 * rows_to_complex(self._check(x)))

    def local_index_array(self, x):
        x = self._check(x)
        at_branch = infinite_rows(x) | (np.where(np.isfinite(x), x, 1.0) == 0).all(axis=1)
        return np.where(at_branch, 2, 1)

    def branch_distance(self, x):
        return np.linalg.norm(self._check(x), axis=1)

    @property
    def branch_points(self):
        return (BranchPoint(ExtendedPoint.finite(0.0, 0.0), 2),
                BranchPoint(ExtendedPoint.infinity(2), 2))

    def to_dict(self):
        return {"family": self.family, "c": [self.c.real, self.c.imag]}


class StretchPower(PowerMap):
    """z -> sigma_K(z^d) with the stretch sigma_K(x + iy) = Kx + iy."""

    family = "stretch_power"

    def __init__(self, d: int, K: float):
        super().__init__(d)
        K = float(K)
        if not K >= 1.0:
            raise MapConfigError(f"stretch factor must be >= 1, got {K}")
        if not self.d > K:
            raise MapConfigError(f"StretchPower needs d > K, got d={self.d}, K={K}")
        self.K = K
        self.inner_dilatation = K
        self.outer_dilatation = K

    def _eval_complex(self, z):
        w = z ** self.d
        return self.K * w.real + 1j * w.imag

    def _slots_complex(self, w):
        return _roots(w.real / self.K + 1j * w.imag, self.d)

    def jacobian_array(self, x):
        return np.diag([self.K, 1.0]) @ super().jacobian_array(x)

    def to_dict(self):
        return {"family": self.family, "d": self.d, "K": self.K}


class Winding(QRMap):
    """Winding of order k about the codimension-2 axis {x1 = x2 = 0}.

    In the (x1, x2) plane this is (r, theta) -> (r, k theta); the remaining
    coordinates are kept.  For n = 3 the map is cylindrical.
    """

    family = "winding"

    def __init__(self, k: int, n: int = 2):
        if int(k) != k or k < 2:
            raise MapConfigError(f"winding order must be an integer >= 2, got {k!r}")
        if int(n) != n or n < 2:
            raise MapConfigError(f"dimension must be an integer >= 2, got {n!r}")
        self.k, self.dim = int(k), int(n)
        self.degree = self.k
        self.inner_dilatation = float(self.k)
        self.outer_dilatation = float(self.k) ** (self.dim - 1)

    def _planar(self, x):
        return x[:, 0] + 1j * x[:, 1]

    def _eval_finite(self, x):
        z = self._planar(x)
        out = x.copy()
        w = np.abs(z) * np.exp(1j * self.k * np.angle(z))
        out[:, 0], out[:, 1] = w.real, w.imag
        return out

    def _slots_finite(self, y):
        w = self._planar(y)
        roots = np.abs(w)[:, None] * np.exp(
            1j * (np.angle(w)[:, None] + 2 * np.pi * np.arange(self.k)[None, :]) / self.k)
        out = np.repeat(y[:, None, :], self.k, axis=1)
        out[:, :, 0], out[:, :, 1] = roots.real, roots.imag
        return out

    def jacobian_array(self, x):
        x = self._check(x)
        z = self._planar(x)
        r = np.abs(z)
        k = self.k
        fz = (k + 1) / 2 * z ** (k - 1) * r ** (1 - k)
        fzbar = (1 - k) / 2 * z ** (k + 1) * r ** (-1 - k)
        jac = np.tile(np.eye(self.dim), (x.shape[0], 1, 1))
        col0, col1 = fz + fzbar, 1j * (fz - fzbar)
        jac[:, 0, 0], jac[:, 1, 0] = col0.real, col0.imag
        jac[:, 0, 1], jac[:, 1, 1] = col1.real, col1.imag
        return jac

    def local_index_array(self, x):
        x = self._check(x)
        at_branch = infinite_rows(x) | ((x[:, 0] == 0) & (x[:, 1] == 0))
        return np.where(at_branch, self.k, 1)

    def branch_distance(self, x):
        x = self._check(x)
        return np.hypot(x[:, 0], x[:, 1])

    @property
    def branch_points(self):
        """The origin (representing the axis x1 = x2 = 0) and infinity."""
        return (BranchPoint(ExtendedPoint.finite(*([0.0] * self.dim)), self.k),
                BranchPoint(ExtendedPoint.infinity(self.dim), self.k))

    def to_dict(self):
        return {"family": self.family, "k": self.k, "n": self.dim}


class Winding3D(Winding):
    """Cylindrical winding (r, theta, x3) -> (r, k theta, x3) on R^3."""

    family = "winding3d"

    def __init__(self, k: int):
        super().__init__(k, 3)

    def to_dict(self):
        return {"family": self.family, "k": self.k}


class Iterate(QRMap):
    """The k-th iterate of a catalog map, with composed exact inverses."""

    family = "iterate"

    def __init__(self, base: QRMap, k: int):
        if int(k) != k or k < 1:
            raise MapConfigError(f"iterate count must be >= 1, got {k!r}")
        self.base, self.k = base, int(k)
        self.dim = base.dim
        self.degree = base.degree ** self.k
        self.inner_dilatation = base.inner_dilatation ** self.k
        self.outer_dilatation = base.outer_dilatation ** self.k
        self.polynomial_type = base.polynomial_type

    def eval_array(self, x):
        x = self._check(x)
        for _ in range(self.k):
            x = self.base.eval_array(x)
        return x

    def preimage_slots(self, y):
        y = self._check(y)
        level = y[:, None, :]
        for _ in range(self.k):
            nxt = self.base.preimage_slots(level.reshape(-1, self.dim))
            level = nxt.reshape(y.shape[0], -1, self.dim)
        return level

    def jacobian_array(self, x):
        x = self._check(x)
        jac = np.tile(np.eye(self.dim), (x.shape[0], 1, 1))
        for _ in range(self.k):
            jac = self.base.jacobian_array(x) @ jac
            x = self.base.eval_array(x)
        return jac

    def local_index_array(self, x):
        x = self._check(x)
        index = np.ones(x.shape[0], dtype=int)
        for _ in range(self.k):
            index *= self.base.local_index_array(x)
            x = self.base.eval_array(x)
        return index

    def branch_distance(self, x):
        x = self._check(x)
        dist = np.full(x.shape[0], np.inf)
        for _ in range(self.k):
            dist = np.minimum(dist, self.base.branch_distance(x))
            x = self.base.eval_array(x)
        return dist

    @property
    def branch_points(self):
        raise NotImplementedError("branch set of an iterate is not tabulated")

    def to_dict(self):
        return {"family": self.family, "base": self.base.to_dict(), "k": self.k}


# -- construction from JSON --------------------------------------------------

def _parse_complex(value) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict):
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def _require(spec, *keys):
    missing = [k for k in keys if k not in spec]
    if missing:
        raise MapConfigError(f"map '{spec.get('family')}' is missing {missing}")


def map_from_dict(spec: dict) -> QRMap:
    """Build a catalog map from a JSON-style descriptor."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise MapConfigError("map descriptor must be an object with a 'family' key")
    family = str(spec["family"]).lower()
    try:
        if family == "power":
            _require(spec, "d")
            return PowerMap(spec["d"])
        if family == "quadratic":
            return Quadratic(_parse_complex(spec.get("c", 0.0)))
        if family == "stretch_power":
            _require(spec, "d", "K")
            return StretchPower(spec["d"], spec["K"])
        if family == "winding":
            _require(spec, "k")
            return Winding(spec["k"], spec.get("n", 2))
        if family == "winding3d":
            _require(spec, "k")
            return Winding3D(spec["k"])
        if family == "iterate":
            _require(spec, "base", "k")
            return Iterate(map_from_dict(spec["base"]), spec["k"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MapConfigError):
            raise
        raise MapConfigError(f"bad parameter in {spec}: {exc}") from exc
    raise MapConfigError(f"unknown map family {spec['family']!r}")


# -- dilatation --------------------------------------------------------------

def finite_difference_jacobian(fn, x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference derivative matrix of fn at the finite point x."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    shifts = np.concatenate([np.eye(n) * step, -np.eye(n) * step])
    values = fn(x[None, :] + shifts)
    if not np.isfinite(values).all():
        raise NearBranchPointError("finite-difference stencil left the finite plane")
    return ((values[:n] - values[n:]) / (2 * step)).T


def dilatations_from_matrix(jac: np.ndarray) -> DilatationEstimate:
    n = jac.shape[0]
    sv = np.linalg.svd(jac, compute_uv=False)
    det = float(np.linalg.det(jac))
    if det == 0:
        raise NearBranchPointError("derivative is singular")
    J = abs(det)
    return DilatationEstimate(K_O_est=float(sv[0] ** n / J), K_I_est=float(J / sv[-1] ** n),
                              jacobian=det, singular_values=tuple(float(s) for s in sv))


def numeric_dilatation(fmap: QRMap, x: ExtendedPoint, step: float = DEFAULT_STEP) -> DilatationEstimate:
    """Dilatations of fmap at x from a central-difference derivative."""
    if x.is_infinity:
        raise NearBranchPointError("finite differences need a finite point")
    row = x.to_row()
    if fmap.branch_distance(row[None, :])[0] < 10 * step:
        raise NearBranchPointError(f"{x} is within {10 * step:g} of the branch set")
    return dilatations_from_matrix(finite_difference_jacobian(fmap.eval_array, row, step))


def iterate_dilatation_check(fmap: QRMap, x: ExtendedPoint, k: int,
                             step: float = DEFAULT_STEP) -> tuple[float, float]:
    """Finite-difference K_I of the k-th iterate at x and the bound K_I(f)^k."""
    if x.is_infinity:
        raise NearBranchPointError("finite differences need a finite point")
    row = x.to_row()[None, :]
    orbit = row
    for _ in range(k):
        if infinite_rows(orbit).any() or fmap.branch_distance(orbit)[0] < 10 * step:
            raise NearBranchPointError("orbit enters a neighborhood of the branch set")
        orbit = fmap.eval_array(orbit)
    est = dilatations_from_matrix(
        finite_difference_jacobian(Iterate(fmap, k).eval_array, row[0], step))
    return est.K_I_est, fmap.inner_dilatation ** k


def preimage_weights(fmap: QRMap, y: ExtendedPoint) -> list[tuple[ExtendedPoint, Fraction]]:
    """Preimages with weights i(x, f)/deg(f)."""
    pre = fmap.preimages(y)
    return [(p, Fraction(i, fmap.degree)) for p, i in pre.entries]


def catalog_maps() -> list[QRMap]:
    """One representative of every family, as used by the verification suite."""
    return [PowerMap(2), PowerMap(3), Quadratic(0), Quadratic(-1), StretchPower(3, 2),
            Winding(3, 2), Winding(2, 2), Winding3D(2)]

