"""Core grid data structures shared by every stage of the solver.

Array layout convention used throughout the package:

- scalar fields live on arrays of shape ``(n_eta, n_xi)``: axis 0 runs along
  eta (rows), axis 1 along xi (columns);
- multi-channel fields have shape ``(n_channels, n_eta, n_xi)``;
- the four reference-rectangle edges are named ``bottom`` (eta = 0),
  ``top`` (eta = n_eta - 1), ``left`` (xi = 0) and ``right``
  (xi = n_xi - 1); bottom/top polylines run in increasing xi, left/right
  in increasing eta.

For a periodic (cut doubly-connected) domain the cut is always the
left/right edge pair: column ``n_xi - 1`` duplicates column 0, and column 0
is the owner of the seam values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EDGE_NAMES = ("bottom", "right", "top", "left")

# Node classification codes for masks.
MASK_BOUNDARY = 0
MASK_NEAR = 1  # one-sided stencil zone (two layers next to a boundary)
MASK_INTERIOR = 2


class GridError(ValueError):
    """Raised for malformed grids, folded meshes, or inconsistent inputs."""


@dataclass(frozen=True)
class ReferenceGrid:
    """Uniform rectangular lattice of the reference domain."""

    n_xi: int
    n_eta: int
    d_xi: float = 1.0
    d_eta: float = 1.0

    def __post_init__(self):
        if self.n_xi < 5 or self.n_eta < 5:
            raise GridError(
                f"reference grid must be at least 5x5, got {self.n_xi}x{self.n_eta}"
            )
        if self.d_xi <= 0 or self.d_eta <= 0:
            raise GridError("reference spacings must be strictly positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_eta, self.n_xi)


@dataclass
class BoundaryCurves:
    """Prescribed physical boundary polylines, one per reference edge.

    ``edges`` maps edge name -> array of shape (n_points, 2). ``periodic``
    names the identified edge pair for a cut doubly-connected domain (only
    the ("left", "right") pair is supported); the two listed polylines must
    be identical point for point.
    """

    edges: dict[str, np.ndarray]
    periodic: tuple[str, str] | None = None

    def __post_init__(self):
        missing = [e for e in EDGE_NAMES if e not in self.edges]
        if missing:
            raise GridError(f"missing boundary edges: {missing}")
        for name in EDGE_NAMES:
            pts = np.asarray(self.edges[name], dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
                raise GridError(f"edge {name!r} must be an (n, 2) point array")
            self.edges[name] = pts
        if self.periodic is not None and set(self.periodic) != {"left", "right"}:
            raise GridError("only the left/right edge pair may be periodic")
        self._check_consistency()

    def _check_consistency(self):
        b, r, t, l = (self.edges[e] for e in EDGE_NAMES)
        if b.shape[0] != t.shape[0]:
            raise GridError("bottom and top edges must have the same node count")
        if l.shape[0] != r.shape[0]:
            raise GridError("left and right edges must have the same node count")
        if self.periodic is None:
            corners = [
                (b[0], l[0], "bottom-left"),
                (b[-1], r[0], "bottom-right"),
                (t[0], l[-1], "top-left"),
                (t[-1], r[-1], "top-right"),
            ]
            for p, q, where in corners:
                if not np.array_equal(p, q):
                    raise GridError(f"adjacent edges disagree at {where} corner")
        else:
            if not np.array_equal(l, r):
                raise GridError("periodic edge pair must carry identical points")
            for edge, idx in (("bottom", 0), ("top", -1)):
                e = self.edges[edge]
                if not (np.array_equal(e[0], l[idx]) and np.array_equal(e[-1], r[idx])):
                    raise GridError(f"{edge} edge must meet the periodic cut endpoints")

    @property
    def n_xi(self) -> int:
        return self.edges["bottom"].shape[0]

    @property
    def n_eta(self) -> int:
        return self.edges["left"].shape[0]


@dataclass
class CurvilinearMesh:
    """Discrete forward map: physical node coordinates on the reference lattice."""

    x: np.ndarray
    y: np.ndarray
    ref: ReferenceGrid
    periodic_xi: bool = False

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.x.shape != self.ref.shape or self.y.shape != self.ref.shape:
            raise GridError(
                f"coordinate arrays {self.x.shape} do not match grid {self.ref.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.ref.shape


@dataclass
class TransformMetrics:
    """Precomputed mapping derivatives and Jacobian determinant at every node."""

    dx_dxi: np.ndarray
    dx_deta: np.ndarray
    dy_dxi: np.ndarray
    dy_deta: np.ndarray
    jac: np.ndarray
    ref: ReferenceGrid
    periodic_xi: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.ref.shape


@dataclass
class GridField:
    """Multi-channel scalar field on the reference lattice."""

    values: np.ndarray  # (n_channels, n_eta, n_xi)
    names: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2:
            self.values = self.values[None]
        if self.values.ndim != 3:
            raise GridError("field values must have shape (channels, n_eta, n_xi)")
        if not self.names:
            self.names = tuple(f"c{i}" for i in range(self.values.shape[0]))
        if len(self.names) != self.values.shape[0]:
            raise GridError("channel name count does not match channel count")

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]


def node_mask(n_eta: int, n_xi: int, periodic_xi: bool = False) -> np.ndarray:
    """Classify nodes as boundary / one-sided zone / interior.

    On a periodic-xi grid the cut is not a boundary: only the eta extremes
    are boundary rows and the xi direction has no one-sided zone.
    """
    mask = np.full((n_eta, n_xi), MASK_INTERIOR, dtype=np.int8)
    mask[1, :] = MASK_NEAR
    mask[-2, :] = MASK_NEAR
    if not periodic_xi:
        mask[2:-2, 1] = MASK_NEAR
        mask[2:-2, -2] = MASK_NEAR
        mask[:, 0] = MASK_BOUNDARY
        mask[:, -1] = MASK_BOUNDARY
    mask[0, :] = MASK_BOUNDARY
    mask[-1, :] = MASK_BOUNDARY
    return mask


def loss_mask(n_eta: int, n_xi: int, periodic_xi: bool = False) -> np.ndarray:
    """Boolean mask of residual-eligible nodes.

    Eligible nodes are every non-boundary node (the one-sided zone counts);
    on periodic grids the duplicated seam column is excluded so no node is
    counted twice.
    """
    eligible = node_mask(n_eta, n_xi, periodic_xi) != MASK_BOUNDARY
    if periodic_xi:
        eligible[:, -1] = False
    return eligible


# ---------------------------------------------------------------------------
# Plain-text file formats (exact round-trip: repr() of Python floats).
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_boundary_file(path, bc: BoundaryCurves) -> None:
    with open(path, "w") as fh:
        for idx, name in enumerate(EDGE_NAMES):
            pts = bc.edges[name]
            fh.write(f"edge {idx} {pts.shape[0]}\n")
            for px, py in pts:
                fh.write(f"{_fmt(px)} {_fmt(py)}\n")
        if bc.periodic is not None:
            i, j = (EDGE_NAMES.index(e) for e in bc.periodic)
            fh.write(f"periodic {i} {j}\n")


def read_boundary_file(path) -> BoundaryCurves:
    edges: dict[str, np.ndarray] = {}
    periodic = None
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        if parts[0] == "edge":
            if len(parts) != 3:
                raise GridError(f"malformed edge header: {lines[pos]!r}")
            idx, npts = int(parts[1]), int(parts[2])
            if not 0 <= idx < 4:
                raise GridError(f"edge index out of range: {idx}")
            pts = np.empty((npts, 2), dtype=np.float64)
            for k in range(npts):
                vals = lines[pos + 1 + k].split()
                pts[k] = (float(vals[0]), float(vals[1]))
            edges[EDGE_NAMES[idx]] = pts
            pos += 1 + npts
        elif parts[0] == "periodic":
            periodic = (EDGE_NAMES[int(parts[1])], EDGE_NAMES[int(parts[2])])
            pos += 1
        else:
            raise GridError(f"unexpected line in boundary file: {lines[pos]!r}")
    return BoundaryCurves(edges=edges, periodic=periodic)


def write_mesh_file(path, mesh: CurvilinearMesh) -> None:
    with open(path, "w") as fh:
        fh.write(f"mesh {mesh.ref.n_xi} {mesh.ref.n_eta}\n")
        if mesh.periodic_xi:
            fh.write("periodic 3 1\n")
        for j in range(mesh.ref.n_eta):
            for i in range(mesh.ref.n_xi):
                fh.write(f"{_fmt(mesh.x[j, i])} {_fmt(mesh.y[j, i])}\n")


def read_mesh_file(path) -> CurvilinearMesh:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[0] != "mesh" or len(header) != 3:
        raise GridError(f"malformed mesh header: {lines[0]!r}")
    n_xi, n_eta = int(header[1]), int(header[2])
    pos = 1
    periodic_xi = False
    if pos < len(lines) and lines[pos].startswith("periodic"):
        periodic_xi = True
        pos += 1
    x = np.empty((n_eta, n_xi), dtype=np.float64)
    y = np.empty((n_eta, n_xi), dtype=np.float64)
    for j in range(n_eta):
        for i in range(n_xi):
            vals = lines[pos].split()
            x[j, i], y[j, i] = float(vals[0]), float(vals[1])
            pos += 1
    return CurvilinearMesh(x=x, y=y, ref=ReferenceGrid(n_xi, n_eta), periodic_xi=periodic_xi)


def write_field_file(path, fld: GridField) -> None:
    c, n_eta, n_xi = fld.values.shape
    with open(path, "w") as fh:
        fh.write(f"field {c} {n_xi} {n_eta} {' '.join(fld.names)}\n")
        for j in range(n_eta):
            for i in range(n_xi):
                fh.write(" ".join(_fmt(fld.values[k, j, i]) for k in range(c)) + "\n")


def read_field_file(path) -> GridField:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[0] != "field":
        raise GridError(f"malformed field header: {lines[0]!r}")
    c, n_xi, n_eta = int(header[1]), int(header[2]), int(header[3])
    names = tuple(header[4 : 4 + c])
    values = np.empty((c, n_eta, n_xi), dtype=np.float64)
    pos = 1
    for j in range(n_eta):
        for i in range(n_xi):
            vals = lines[pos].split()
            for k in range(c):
                values[k, j, i] = float(vals[k])
            pos += 1
    return GridField(values=values, names=names)
