"""Parametric solid bodies as structured hexahedral meshes.

Bodies sit on a fixed rectangular footprint with a flat bottom surface
(z = 0) and a top surface given by a per-node-column height field.  Node
columns are graded linearly from the bottom to the local height, so curved
tops stay structured (no overhangs).  Boundary faces are tagged:

    S1  top surface (heat flux applied)
    S2  bottom surface (radiation + temperature sensors)
    S3  side surfaces (insulated)

Grid order convention, shared by every module: row-major with x fastest.
Node id = ix + (nx+1) * (iy + (ny+1) * iz).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, InvertedElementError

# Body footprint in meters; plate-like bodies keep the inversion well-posed.
FOOTPRINT = (0.3, 0.3)

# Default sensor / flux sampling grid (30 x 30 = 900 points per surface).
DEFAULT_GRID = 30

# Local corner signs of the trilinear hexahedron, bottom quad then top quad,
# counterclockwise viewed from +z.
HEX_CORNERS = np.array(
    [
        [-1, -1, -1],
        [+1, -1, -1],
        [+1, +1, -1],
        [-1, +1, -1],
        [-1, -1, +1],
        [+1, -1, +1],
        [+1, +1, +1],
        [-1, +1, +1],
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class HeightField:
    """Top-surface heights, one per node column.

    values: (ny+1, nx+1) array of total column heights in meters, indexed
    [iy, ix].  base_thickness records the nominal flat thickness the field
    was built from (equal to every value for flat-top bodies).
    """

    values: np.ndarray
    base_thickness: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 2:
            raise DimensionError("height field must be a 2D array of at least 2x2 node columns")
        if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
            raise DimensionError("all heights must be positive and finite")
        if self.base_thickness <= 0.0:
            raise DimensionError("base thickness must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def is_flat(self) -> bool:
        return bool(np.ptp(self.values) == 0.0)

    @classmethod
    def flat(cls, nx: int, ny: int, height: float) -> "HeightField":
        return cls(values=np.full((ny + 1, nx + 1), height), base_thickness=height)

    @classmethod
    def from_json(cls, path) -> "HeightField":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        values = np.asarray(raw["heights"], dtype=np.float64)
        nx, ny = int(raw["nx"]), int(raw["ny"])
        if values.shape != (ny + 1, nx + 1):
            raise DimensionError(
                f"heights shape {values.shape} does not match (ny+1, nx+1)=({ny + 1}, {nx + 1})"
            )
        return cls(values=values, base_thickness=float(raw["base"]))

    def to_json(self, path) -> None:
        ny1, nx1 = self.values.shape
        payload = {
            "nx": nx1 - 1,
            "ny": ny1 - 1,
            "base": self.base_thickness,
            "heights": self.values.tolist(),
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True)
            f.write("\n")


@dataclass(frozen=True)
class Mesh:
    """Structured trilinear-hexahedral mesh of one body.

    nodes: (n_nodes, 3) coordinates in meters.
    elems: (n_elems, 8) node indices per HEX_CORNERS ordering.
    s1_faces / s2_faces / s3_faces: (F, 4) node indices of tagged boundary
    quads; S1/S2 faces are ordered row-major (ex fastest).
    """

    nodes: np.ndarray
    elems: np.ndarray
    s1_faces: np.ndarray
    s2_faces: np.ndarray
    s3_faces: np.ndarray
    nx: int
    ny: int
    nz: int
    footprint: tuple
    height_field: HeightField

    def __post_init__(self):
        for name in ("nodes", "elems", "s1_faces", "s2_faces", "s3_faces"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elems(self) -> int:
        return self.elems.shape[0]

    def node_id(self, ix, iy, iz):
        nx1, ny1 = self.nx + 1, self.ny + 1
        return ix + nx1 * (np.asarray(iy) + ny1 * np.asarray(iz))


@dataclass(frozen=True)
class SensorLayout:
    """Uniform grid of sensor nodes on S2, row-major (x fastest)."""

    node_ids: np.ndarray
    grid: int

    def __post_init__(self):
        self.node_ids.setflags(write=False)


@dataclass(frozen=True)
class FluxLayout:
    """Uniform grid of flux sampling faces on S1, row-major (x fastest)."""

    face_ids: np.ndarray
    centers: np.ndarray
    grid: int

    def __post_init__(self):
        self.face_ids.setflags(write=False)
        self.centers.setflags(write=False)


def corner_jacobians(nodes: np.ndarray, elems: np.ndarray) -> np.ndarray:
    """Jacobian determinants at all 8 corners of every element, (E, 8)."""
    coords = nodes[elems]  # (E, 8, 3)
    dets = np.empty((elems.shape[0], 8))
    for c, corner in enumerate(HEX_CORNERS):
        dN = shape_gradients_local(corner)  # (8, 3)
        J = np.einsum("ia,eib->eab", dN, coords)
        dets[:, c] = np.linalg.det(J)
    return dets


def shape_values_local(local_point) -> np.ndarray:
    """Trilinear shape function values at (xi, eta, zeta), shape (8,)."""
    p = np.asarray(local_point, dtype=np.float64)
    return np.prod(1.0 + HEX_CORNERS * p, axis=1) / 8.0


def shape_gradients_local(local_point) -> np.ndarray:
    """Local gradients dN_i/d(xi, eta, zeta) at a point, shape (8, 3)."""
    p = np.asarray(local_point, dtype=np.float64)
    terms = 1.0 + HEX_CORNERS * p  # (8, 3)
    grad = np.empty((8, 3))
    for a in range(3):
        others = [b for b in range(3) if b != a]
        grad[:, a] = HEX_CORNERS[:, a] * terms[:, others[0]] * terms[:, others[1]] / 8.0
    return grad


def build_mesh(
    height_field: HeightField,
    nx: int,
    ny: int,
    nz: int,
    footprint: tuple = FOOTPRINT,
) -> Mesh:
    """Mesh the body under ``height_field`` into nx x ny x nz hexahedra.

    The height field must supply one height per node column, i.e. have
    shape (ny+1, nx+1).  Every element's Jacobian is checked at its 8
    corners; inverted elements reject the build.
    """
    if nx < 1 or ny < 1 or nz < 1:
        raise DimensionError("nx, ny, nz must all be >= 1")
    heights = height_field.values
    if heights.shape != (ny + 1, nx + 1):
        raise DimensionError(
            f"height field shape {heights.shape} does not match (ny+1, nx+1)=({ny + 1}, {nx + 1})"
        )

    lx, ly = footprint
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zfrac = np.arange(nz + 1) / nz

    # Node columns graded linearly from z=0 to the local height.
    nx1, ny1, nz1 = nx + 1, ny + 1, nz + 1
    X = np.broadcast_to(xs[None, None, :], (nz1, ny1, nx1))
    Y = np.broadcast_to(ys[None, :, None], (nz1, ny1, nx1))
    Z = zfrac[:, None, None] * heights[None, :, :]
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def nid(ix, iy, iz):
        return ix + nx1 * (iy + ny1 * iz)

    # Element id = ex + nx * (ey + ny * ez): ez slowest, ex fastest.
    ez, ey, ex = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    ex, ey, ez = ex.ravel(), ey.ravel(), ez.ravel()
    elems = np.stack(
        [
            nid(ex, ey, ez),
            nid(ex + 1, ey, ez),
            nid(ex + 1, ey + 1, ez),
            nid(ex, ey + 1, ez),
            nid(ex, ey, ez + 1),
            nid(ex + 1, ey, ez + 1),
            nid(ex + 1, ey + 1, ez + 1),
            nid(ex, ey + 1, ez + 1),
        ],
        axis=1,
    ).astype(np.int64)

    dets = corner_jacobians(nodes, elems)
    if np.any(dets <= 0.0):
        bad = int(np.argwhere(np.any(dets <= 0.0, axis=1))[0][0])
        raise InvertedElementError(
            f"element {bad} has non-positive Jacobian determinant (min {dets.min():.3e})"
        )

    # Boundary faces; S1/S2 row-major with ex fastest.
    fx, fy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    fx, fy = fx.ravel(), fy.ravel()
    s2 = np.stack([nid(fx, fy, 0), nid(fx + 1, fy, 0), nid(fx + 1, fy + 1, 0), nid(fx, fy + 1, 0)], axis=1)
    s1 = np.stack(
        [nid(fx, fy, nz), nid(fx + 1, fy, nz), nid(fx + 1, fy + 1, nz), nid(fx, fy + 1, nz)],
        axis=1,
    )

    side = []
    gy, gz = np.meshgrid(np.arange(ny), np.arange(nz), indexing="xy")
    gy, gz = gy.ravel(), gz.ravel()
    side.append(np.stack([nid(0, gy, gz), nid(0, gy + 1, gz), nid(0, gy + 1, gz + 1), nid(0, gy, gz + 1)], axis=1))
    side.append(np.stack([nid(nx, gy, gz), nid(nx, gy + 1, gz), nid(nx, gy + 1, gz + 1), nid(nx, gy, gz + 1)], axis=1))
    gx, gz = np.meshgrid(np.arange(nx), np.arange(nz), indexing="xy")
    gx, gz = gx.ravel(), gz.ravel()
    side.append(np.stack([nid(gx, 0, gz), nid(gx + 1, 0, gz), nid(gx + 1, 0, gz + 1), nid(gx, 0, gz + 1)], axis=1))
    side.append(np.stack([nid(gx, ny, gz), nid(gx + 1, ny, gz), nid(gx + 1, ny, gz + 1), nid(gx, ny, gz + 1)], axis=1))
    s3 = np.concatenate(side, axis=0)

    return Mesh(
        nodes=nodes,
        elems=elems,
        s1_faces=s1.astype(np.int64),
        s2_faces=s2.astype(np.int64),
        s3_faces=s3.astype(np.int64),
        nx=nx,
        ny=ny,
        nz=nz,
        footprint=tuple(footprint),
        height_field=height_field,
    )


def sensor_layout(mesh: Mesh, grid: int = DEFAULT_GRID) -> SensorLayout:
    """Uniform grid x grid subsample of S2 nodes, row-major.

    Requires (nx+1) and (ny+1) divisible by ``grid`` so the subsample is
    uniform; e.g. nx=29 uses every S2 node, nx=59 every second node.
    """
    nx1, ny1 = mesh.nx + 1, mesh.ny + 1
    if nx1 % grid or ny1 % grid:
        raise ConfigurationError(
            f"S2 node grid {nx1}x{ny1} admits no uniform {grid}x{grid} subsample"
        )
    sx, sy = nx1 // grid, ny1 // grid
    gi = np.arange(grid)
    ix, iy = np.meshgrid(gi * sx, gi * sy, indexing="xy")
    ids = mesh.node_id(ix.ravel(), iy.ravel(), 0)
    return SensorLayout(node_ids=ids.astype(np.int64), grid=grid)


def flux_layout(mesh: Mesh, grid: int = DEFAULT_GRID) -> FluxLayout:
    """Uniform grid x grid subsample of S1 face centers, row-major."""
    if mesh.nx % grid or mesh.ny % grid:
        raise ConfigurationError(
            f"S1 face grid {mesh.nx}x{mesh.ny} admits no uniform {grid}x{grid} subsample"
        )
    sx, sy = mesh.nx // grid, mesh.ny // grid
    gi = np.arange(grid)
    fx, fy = np.meshgrid(gi * sx, gi * sy, indexing="xy")
    face_ids = (fx + mesh.nx * fy).ravel().astype(np.int64)
    centers = mesh.nodes[mesh.s1_faces[face_ids]].mean(axis=1)
    return FluxLayout(face_ids=face_ids, centers=centers, grid=grid)


def flux_grid_coords(grid: int = DEFAULT_GRID, footprint: tuple = FOOTPRINT) -> np.ndarray:
    """Cell-center (x, y) coordinates of the flux sampling grid, (grid, grid, 2).

    Cell [iy, ix] is centered at ((ix+0.5) lx/grid, (iy+0.5) ly/grid); for a
    flat-top mesh with nx=ny=grid these coincide with the S1 face centers.
    """
    lx, ly = footprint
    xs = (np.arange(grid) + 0.5) * lx / grid
    ys = (np.arange(grid) + 0.5) * ly / grid
    out = np.empty((grid, grid, 2))
    out[:, :, 0] = xs[None, :]
    out[:, :, 1] = ys[:, None]
    return out


def bilinear_sample(values: np.ndarray, xs_axis: np.ndarray, ys_axis: np.ndarray, x, y):
    """Clamped bilinear interpolation of ``values[iy, ix]`` on a regular grid.

    Query points outside the axis span take the boundary value (constant
    extrapolation).  x, y may be arrays of any matching shape.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), xs_axis[0], xs_axis[-1])
    y = np.clip(np.asarray(y, dtype=np.float64), ys_axis[0], ys_axis[-1])
    ix = np.clip(np.searchsorted(xs_axis, x, side="right") - 1, 0, len(xs_axis) - 2)
    iy = np.clip(np.searchsorted(ys_axis, y, side="right") - 1, 0, len(ys_axis) - 2)
    tx = (x - xs_axis[ix]) / (xs_axis[ix + 1] - xs_axis[ix])
    ty = (y - ys_axis[iy]) / (ys_axis[iy + 1] - ys_axis[iy])
    v00 = values[iy, ix]
    v01 = values[iy, ix + 1]
    v10 = values[iy + 1, ix]
    v11 = values[iy + 1, ix + 1]
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)


def sample_heights_at(height_field: HeightField, points_xy: np.ndarray, footprint: tuple = FOOTPRINT) -> np.ndarray:
    """Top-surface height at arbitrary (x, y) points via bilinear interpolation."""
    ny1, nx1 = height_field.values.shape
    lx, ly = footprint
    xs = np.linspace(0.0, lx, nx1)
    ys = np.linspace(0.0, ly, ny1)
    pts = np.asarray(points_xy, dtype=np.float64)
    return bilinear_sample(height_field.values, xs, ys, pts[..., 0], pts[..., 1])
