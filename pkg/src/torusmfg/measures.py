"""Weighted particle clouds over products of component spaces.

A `DiscreteMeasure` lives on a `ProductSpace` whose components are a
torus block, optional control-grid blocks (atoms of a finite grid with a
declared metric matrix) and optional free-vector blocks (directions,
optionally confined to a ball).  Push-forward, marginals, disintegration
and JSON round-trip are provided here; optimal transport in `transport`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import StructuralError
from .torus import wrap

WEIGHT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TorusComponent:
    dim: int
    kind: str = field(default="torus", init=False)


@dataclass(frozen=True, eq=False)
class GridComponent:
    """A finite control grid with its (already changed, if needed) metric."""

    name: str
    atoms: np.ndarray          # (K, adim)
    metric: np.ndarray         # (K, K) pairwise distances
    kind: str = field(default="grid", init=False)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        metric = np.asarray(self.metric, dtype=np.float64)
        if metric.shape != (atoms.shape[0], atoms.shape[0]):
            raise StructuralError("grid metric shape does not match atom count")
        atoms.flags.writeable = False
        metric.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "metric", metric)

    @property
    def size(self) -> int:
        return self.atoms.shape[0]


@dataclass(frozen=True, eq=False)
class VectorComponent:
    dim: int
    radius: float | None = None
    kind: str = field(default="vector", init=False)


def _components_compatible(a, b) -> bool:
    if a.kind != b.kind:
        return False
    if a.kind == "torus" or a.kind == "vector":
        if a.dim != b.dim:
            return False
        if a.kind == "vector":
            ra = a.radius if a.radius is not None else np.inf
            rb = b.radius if b.radius is not None else np.inf
            return bool(np.isclose(ra, rb, rtol=0, atol=1e-12) or ra == rb)
        return True
    return (
        a.name == b.name
        and a.atoms.shape == b.atoms.shape
        and np.allclose(a.atoms, b.atoms, atol=1e-12)
        and np.allclose(a.metric, b.metric, atol=1e-12)
    )


@dataclass(frozen=True, eq=False)
class ProductSpace:
    components: tuple

    def compatible(self, other: "ProductSpace") -> bool:
        if len(self.components) != len(other.components):
            return False
        return all(_components_compatible(a, b) for a, b in zip(self.components, other.components))

    def component_index(self, kind: str, name: str | None = None) -> int:
        for i, c in enumerate(self.components):
            if c.kind == kind and (name is None or getattr(c, "name", None) == name):
                return i
        raise StructuralError(f"space has no {kind} component", kind=kind, name=name)

    def sub(self, indices: Sequence[int]) -> "ProductSpace":
        return ProductSpace(tuple(self.components[i] for i in indices))


def measure_space(d: int) -> ProductSpace:
    return ProductSpace((TorusComponent(d),))


def control_space(d: int, grid: GridComponent) -> ProductSpace:
    return ProductSpace((TorusComponent(d), grid))


def direction_space(d: int, grid: GridComponent, radius: float) -> ProductSpace:
    return ProductSpace((TorusComponent(d), grid, VectorComponent(d, radius)))


def _validate_points(space: ProductSpace, points, n_expected=None):
    if len(points) != len(space.components):
        raise StructuralError(
            "point tuple arity does not match space",
            expected=len(space.components), got=len(points))
    out = []
    n = n_expected
    for comp, arr in zip(space.components, points):
        if comp.kind == "grid":
            a = np.atleast_1d(np.asarray(arr))
            if not np.issubdtype(a.dtype, np.integer):
                af = np.asarray(a, dtype=np.float64)
                a = np.rint(af).astype(np.int64)
                if np.max(np.abs(af - a), initial=0.0) > 1e-9:
                    raise StructuralError("grid component indices must be integers")
            a = a.astype(np.int64)
            if a.size and (a.min() < 0 or a.max() >= comp.size):
                raise StructuralError("grid index out of range", size=comp.size)
        else:
            a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
            if a.shape[1] != comp.dim:
                raise StructuralError(
                    "component dimension mismatch", expected=comp.dim, got=a.shape[1])
            if comp.kind == "torus":
                a = np.atleast_2d(wrap(a))
            elif comp.radius is not None:
                norms = np.linalg.norm(a, axis=1)
                if norms.size and norms.max() > comp.radius + 1e-12:
                    raise StructuralError(
                        "direction atom outside declared ball",
                        radius=comp.radius, max_norm=float(norms.max()))
        if n is None:
            n = a.shape[0]
        elif a.shape[0] != n:
            raise StructuralError("components disagree on atom count")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        out.append(a)
    return tuple(out), (0 if n is None else n)


class DiscreteMeasure:
    """Immutable weighted particle cloud over a ProductSpace.

    Weights are nonnegative and sum to one (validated to 1e-12, then
    renormalized exactly).  Arrays are copied and frozen; instances are
    safe to share across threads.
    """

    __slots__ = ("space", "points", "weights")

    def __init__(self, space: ProductSpace, points, weights, *, normalize: bool = False):
        pts, n = _validate_points(space, points)
        w = np.asarray(weights, dtype=np.float64).reshape(-1).copy()
        if w.shape[0] != n:
            raise StructuralError("weight count does not match atom count",
                                  atoms=n, weights=w.shape[0])
        if n == 0:
            raise StructuralError("measure needs at least one atom")
        if w.min() < -WEIGHT_TOL:
            raise StructuralError("negative weight", min_weight=float(w.min()))
        w[w < 0] = 0.0
        total = w.sum()
        if not normalize and abs(total - 1.0) > 1e-9:
            raise StructuralError("weights do not sum to 1", total=float(total))
        if total <= 0:
            raise StructuralError("total mass is zero")
        w /= total
        w.flags.writeable = False
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, *_):
        raise AttributeError("DiscreteMeasure is immutable")

    @property
    def n_atoms(self) -> int:
        return self.weights.shape[0]

    def state(self) -> np.ndarray:
        """Coordinates of the (first) torus component, shape (n, d)."""
        i = self.space.component_index("torus")
        return self.points[i]

    def component(self, kind: str, name: str | None = None) -> np.ndarray:
        return self.points[self.space.component_index(kind, name)]

    def marginal(self, indices: Sequence[int], *, coalesce: bool = True) -> "DiscreteMeasure":
        sub = self.space.sub(indices)
        pts = tuple(self.points[i] for i in indices)
        m = DiscreteMeasure(sub, pts, self.weights, normalize=True)
        return m.coalesce() if coalesce else m

    def pushforward(self, h: Callable, space: ProductSpace | None = None) -> "DiscreteMeasure":
        """Image measure under the support-point map ``h``.

        ``h`` receives the tuple of point arrays and returns a tuple of
        point arrays for the target space (default: same space).  Weights
        are carried over unchanged.
        """
        new_points = h(*self.points)
        if not isinstance(new_points, tuple):
            new_points = (new_points,)
        return DiscreteMeasure(space or self.space, new_points, self.weights, normalize=True)

    def _atom_keys(self) -> list[bytes]:
        rows = []
        for i in range(self.n_atoms):
            parts = []
            for arr in self.points:
                parts.append(arr[i].tobytes())
            rows.append(b"|".join(parts))
        return rows

    def coalesce(self) -> "DiscreteMeasure":
        """Merge atoms with bitwise-identical support points."""
        keys = self._atom_keys()
        seen: dict[bytes, int] = {}
        order: list[int] = []
        acc: list[float] = []
        for i, k in enumerate(keys):
            if k in seen:
                acc[seen[k]] += self.weights[i]
            else:
                seen[k] = len(order)
                order.append(i)
                acc.append(float(self.weights[i]))
        if len(order) == self.n_atoms:
            return self
        idx = np.asarray(order)
        pts = tuple(arr[idx] for arr in self.points)
        return DiscreteMeasure(self.space, pts, np.asarray(acc), normalize=True)

    def canonical(self) -> "DiscreteMeasure":
        """Deterministic atom order (sort by support bytes, then weight)."""
        m = self.coalesce()
        keys = m._atom_keys()
        idx = sorted(range(m.n_atoms), key=lambda i: (keys[i], m.weights[i]))
        idx = np.asarray(idx)
        return DiscreteMeasure(m.space, tuple(a[idx] for a in m.points), m.weights[idx],
                               normalize=True)

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-12) -> bool:
        if not self.space.compatible(other.space):
            return False
        a, b = self.canonical(), other.canonical()
        if a.n_atoms != b.n_atoms:
            return False
        if not np.allclose(a.weights, b.weights, atol=atol, rtol=0):
            return False
        return all(np.allclose(x, y, atol=atol, rtol=0) for x, y in zip(a.points, b.points))

    # -- serialization (JSON records) ------------------------------------
    def to_records(self) -> list[dict]:
        grids = [i for i, c in enumerate(self.space.components) if c.kind == "grid"]
        vecs = [i for i, c in enumerate(self.space.components) if c.kind == "vector"]
        if len(grids) > 1 or len(vecs) > 1:
            raise StructuralError("record serialization supports at most one grid and one vector")
        ti = self.space.component_index("torus")
        recs = []
        for i in range(self.n_atoms):
            rec = {"point": [float(v) for v in self.points[ti][i]],
                   "weight": float(self.weights[i])}
            if grids:
                rec["control"] = int(self.points[grids[0]][i])
            if vecs:
                rec["direction"] = [float(v) for v in self.points[vecs[0]][i]]
            recs.append(rec)
        return recs

    @staticmethod
    def from_records(space: ProductSpace, records: list[dict]) -> "DiscreteMeasure":
        pts: list[list] = [[] for _ in space.components]
        w = []
        for rec in records:
            for j, comp in enumerate(space.components):
                if comp.kind == "torus":
                    pts[j].append(rec["point"])
                elif comp.kind == "grid":
                    pts[j].append(rec["control"])
                else:
                    pts[j].append(rec["direction"])
            w.append(rec["weight"])
        arrays = tuple(np.asarray(p) for p in pts)
        return DiscreteMeasure(space, arrays, np.asarray(w))

    def __repr__(self):
        kinds = ",".join(c.kind for c in self.space.components)
        return f"DiscreteMeasure({self.n_atoms} atoms over [{kinds}])"


def dirac(space: ProductSpace, point_tuple) -> DiscreteMeasure:
    pts = tuple(np.asarray(p)[None, ...] if np.asarray(p).ndim <= 1 else np.asarray(p)
                for p in point_tuple)
    return DiscreteMeasure(space, pts, np.asarray([1.0]))


def disintegrate(joint: DiscreteMeasure, base_indices: Sequence[int]):
    """Split a joint cloud into (base atom, base weight, conditional) triples.

    Bases are matched by bitwise equality of their support rows; zero-weight
    base classes are excluded.  Recomposition with `recompose` reproduces
    the joint exactly.
    """
    base_indices = tuple(base_indices)
    rest = tuple(i for i in range(len(joint.space.components)) if i not in base_indices)
    if not rest:
        raise StructuralError("disintegration needs a nonempty fiber")
    keys = []
    for i in range(joint.n_atoms):
        keys.append(b"|".join(joint.points[j][i].tobytes() for j in base_indices))
    groups: dict[bytes, list[int]] = {}
    order: list[bytes] = []
    for i, k in enumerate(keys):
        if k not in groups:
            groups[k] = []
            order.append(k)
        groups[k].append(i)
    fiber_space = joint.space.sub(rest)
    out = []
    for k in order:
        idx = np.asarray(groups[k])
        w = joint.weights[idx]
        total = float(w.sum())
        if total <= 0.0:
            continue
        base_point = tuple(joint.points[j][idx[0]] for j in base_indices)
        cond = DiscreteMeasure(fiber_space, tuple(joint.points[j][idx] for j in rest),
                               w / total)
        out.append((base_point, total, cond))
    return out


def recompose(space: ProductSpace, base_indices: Sequence[int], triples) -> DiscreteMeasure:
    """Inverse of `disintegrate`: reassemble the joint from conditionals."""
    base_indices = tuple(base_indices)
    rest = tuple(i for i in range(len(space.components)) if i not in base_indices)
    cols: list[list] = [[] for _ in space.components]
    weights = []
    for base_point, base_w, cond in triples:
        for bpos, j in enumerate(base_indices):
            cols[j].extend([np.asarray(base_point[bpos])] * cond.n_atoms)
        for rpos, j in enumerate(rest):
            cols[j].extend(list(cond.points[rpos]))
        weights.extend(list(base_w * cond.weights))
    arrays = tuple(np.asarray(c) for c in cols)
    return DiscreteMeasure(space, arrays, np.asarray(weights))


__all__ = [
    "TorusComponent", "GridComponent", "VectorComponent", "ProductSpace",
    "measure_space", "control_space", "direction_space",
    "DiscreteMeasure", "dirac", "disintegrate", "recompose",
]
