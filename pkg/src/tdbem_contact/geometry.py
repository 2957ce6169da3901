"""Boundary meshes, time grids and degree-of-freedom layouts.

The boundary is a polyline of straight segments.  Each element carries an
outward unit normal (used by the integral kernels), a region tag and a
contact normal (the direction along which the unilateral constraint acts).
"""
from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError, GeometryError


class Region(IntEnum):
    DIRICHLET = 0
    NEUMANN = 1
    CONTACT = 2


_REGION_NAMES = {"dirichlet": Region.DIRICHLET, "neumann": Region.NEUMANN,
                 "contact": Region.CONTACT}


def parse_region(value) -> Region:
    if isinstance(value, Region):
        return value
    if isinstance(value, (int, np.integer)):
        return Region(int(value))
    try:
        return _REGION_NAMES[str(value).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown region tag {value!r}") from None


@dataclass(frozen=True)
class Material:
    """Mass density and wave speeds of an isotropic elastic medium."""

    rho: float = 1.0
    cP: float = 1.0
    cS: float = 1.0 / math.sqrt(2.0)

    def __post_init__(self):
        if not (self.rho > 0):
            raise ConfigError("Material.rho must be positive")
        if not (self.cP > self.cS > 0):
            raise ConfigError("Material requires cP > cS > 0")

    @property
    def mu(self) -> float:
        return self.rho * self.cS ** 2

    @property
    def lam(self) -> float:
        return self.rho * (self.cP ** 2 - 2.0 * self.cS ** 2)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_l = l*dt on [0, T]."""

    T: float
    n_steps: int

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError("TimeGrid.n_steps must be a positive integer")
        if not (self.T > 0):
            raise ConfigError("TimeGrid.T must be positive")

    @classmethod
    def from_dt(cls, T: float, dt: float, tol: float = 1e-9) -> "TimeGrid":
        n = int(round(T / dt))
        if n < 1 or abs(n * dt - T) > tol * max(1.0, T):
            raise ConfigError(f"dt={dt} does not divide T={T}")
        return cls(T=float(T), n_steps=n)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Polygonal boundary.

    `normals` are outward unit normals of the domain (kernel convention),
    `contact_normals` the directions of the unilateral constraint, and
    `groups` free-form side labels ("top", "slit", ...) used to attach data.
    Elements are oriented so that the tangent (b - a)/h equals J n with
    J the counter-clockwise rotation.
    """

    vertices: np.ndarray
    elements: np.ndarray
    tags: np.ndarray
    groups: tuple
    normals: np.ndarray
    contact_normals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, float)
        e = np.asarray(self.elements, np.int64)
        if v.ndim != 2 or v.shape[1] != 2 or e.ndim != 2 or e.shape[1] != 2:
            raise GeometryError("vertices must be (nv,2) and elements (M,2)")
        if len(self.tags) != len(e) or len(self.groups) != len(e):
            raise GeometryError("one tag and one group label per element")
        lengths = np.hypot(*(v[e[:, 1]] - v[e[:, 0]]).T)
        if np.any(lengths <= 0):
            raise GeometryError("degenerate element")
        nrm = np.asarray(self.normals, float)
        if np.any(np.abs(1.0 - np.hypot(nrm[:, 0], nrm[:, 1])) > 1e-12):
            raise GeometryError("normals must have unit length")

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def a(self) -> np.ndarray:
        return self.vertices[self.elements[:, 0]]

    @property
    def b(self) -> np.ndarray:
        return self.vertices[self.elements[:, 1]]

    @property
    def lengths(self) -> np.ndarray:
        d = self.b - self.a
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def tangents(self) -> np.ndarray:
        return (self.b - self.a) / self.lengths[:, None]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def h_max(self) -> float:
        return float(self.lengths.max())

    def elements_in(self, region: Region) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.tags) == int(region))

    def fingerprint(self) -> str:
        hsh = hashlib.sha1()
        for arr in (self.vertices, self.elements, np.asarray(self.tags),
                    self.normals, self.contact_normals):
            hsh.update(np.ascontiguousarray(arr).tobytes())
        hsh.update("|".join(self.groups).encode())
        return hsh.hexdigest()[:16]


def _outward_from_tangent(t: np.ndarray) -> np.ndarray:
    # n = (t2, -t1) so that J n = t
    return np.column_stack([t[:, 1], -t[:, 0]])


def make_mesh(vertices, elements, tags, groups, contact_normals=None, meta=None):
    v = np.asarray(vertices, float)
    e = np.asarray(elements, np.int64)
    d = v[e[:, 1]] - v[e[:, 0]]
    t = d / np.hypot(d[:, 0], d[:, 1])[:, None]
    n = _outward_from_tangent(t)
    if contact_normals is None:
        contact_normals = -n
    cn = np.asarray(contact_normals, float)
    cn = cn / np.hypot(cn[:, 0], cn[:, 1])[:, None]
    return BoundaryMesh(v, e, np.asarray([int(parse_region(x)) for x in tags]),
                        tuple(groups), n, cn, dict(meta or {}))


def _count(length: float, h: float, what: str) -> int:
    n = int(round(length / h))
    if n < 1 or abs(n * h - length) > 1e-9 * max(1.0, length):
        raise GeometryError(f"h={h} does not divide the {what} length {length}")
    return n


def square_mesh(h: float, side: float = 1.0, regions: dict | None = None,
                contact_normals: dict | None = None) -> BoundaryMesh:
    """Square [-side/2, side/2]^2, counter-clockwise from the lower left corner.

    `regions` maps side names (bottom, right, top, left) to region tags,
    default Neumann everywhere.
    """
    if not h > 0:
        raise GeometryError("h must be positive")
    if h > side:
        raise GeometryError("h larger than the square side")
    regions = {k: parse_region(v) for k, v in (regions or {}).items()}
    n = _count(side, h, "side")
    s = side / 2.0
    corners = np.array([[-s, -s], [s, -s], [s, s], [-s, s]])
    names = ("bottom", "right", "top", "left")
    verts, elems, tags, groups = [], [], [], []
    for k, name in enumerate(names):
        p0, p1 = corners[k], corners[(k + 1) % 4]
        for j in range(n):
            verts.append(p0 + (p1 - p0) * j / n)
    nv = len(verts)
    for k, name in enumerate(names):
        for j in range(n):
            i = k * n + j
            elems.append((i, (i + 1) % nv))
            tags.append(regions.get(name, Region.NEUMANN))
            groups.append(name)
    mesh = make_mesh(verts, elems, tags, groups, meta={"preset": "square", "h": h})
    if contact_normals:
        cn = mesh.contact_normals.copy()
        for name, vec in contact_normals.items():
            cn[np.asarray(groups) == name] = vec
        mesh = make_mesh(verts, elems, tags, groups, cn, mesh.meta)
    return mesh


def slit_mesh(h: float, half_length: float = 0.5,
              contact: tuple = (-0.2, 0.2)) -> BoundaryMesh:
    """Segment [-L, L] x {0}; the contact sub-interval is tagged Contact and
    the remainder Dirichlet.  The body is the upper half-plane, so the
    outward normal is (0,-1) and the contact normal (0,1)."""
    if not h > 0:
        raise GeometryError("h must be positive")
    c0, c1 = contact
    if not (-half_length <= c0 < c1 <= half_length):
        raise GeometryError("contact interval must lie inside the slit")
    n = _count(2 * half_length, h, "slit")
    _count(c1 - c0, h, "contact interval")
    x = np.linspace(-half_length, half_length, n + 1)
    verts = np.column_stack([x, np.zeros_like(x)])
    elems = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    mid = 0.5 * (x[:-1] + x[1:])
    tags = np.where((mid > c0) & (mid < c1), Region.CONTACT, Region.DIRICHLET)
    cn = np.tile([0.0, 1.0], (n, 1))
    return make_mesh(verts, elems, tags, ["slit"] * n, cn,
                     meta={"preset": "slit", "h": h, "contact": [c0, c1]})


def circle_mesh(h: float, radius: float = 0.2, region=Region.CONTACT,
                contact_normal=(0.0, 1.0)) -> BoundaryMesh:
    """Inscribed polygon with uniform angular spacing.

    The vertex count is the smallest multiple of 4 with arc length <= h, so
    that the bottom, top and side points are vertices.
    """
    if not (h > 0 and radius > 0):
        raise GeometryError("h and radius must be positive")
    n = 4 * math.ceil(2 * math.pi * radius / h / 4.0 - 1e-12)
    if n < 4:
        raise GeometryError("h too large for the circle")
    th = -0.5 * math.pi + 2 * math.pi * np.arange(n) / n
    verts = radius * np.column_stack([np.cos(th), np.sin(th)])
    elems = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    cn = None if contact_normal is None else np.tile(contact_normal, (n, 1))
    return make_mesh(verts, elems, [region] * n, ["circle"] * n, cn,
                     meta={"preset": "circle", "h": h, "radius": radius,
                           "n_elements": n, "parametrization": "uniform angle"})


def build_preset_mesh(preset: str, h: float, **params) -> BoundaryMesh:
    builders = {"square": square_mesh, "slit": slit_mesh, "circle": circle_mesh}
    try:
        builder = builders[preset]
    except KeyError:
        raise ConfigError(f"unknown mesh preset {preset!r}") from None
    mesh = builder(h, **params)
    if "contact" in str(params) and len(mesh.elements_in(Region.CONTACT)) == 0:
        raise GeometryError("contact region requested but no contact element")
    return mesh


@dataclass(frozen=True, eq=False)
class DofLayout:
    """Index bookkeeping for psi (traction), u (displacement) and lambda.

    Unknown vector of one time step:
        [psi_1 (n_psi), psi_2 (n_psi), u_1 (n_u), u_2 (n_u)]
    with psi local index 2*e + k (k=0 at vertex a, k=1 at vertex b).
    Multiplier vector of one time step: [lambda_tangential, lambda_normal],
    each of length n_lambda, in the local frame of the contact element.
    """

    n_elements: int
    n_steps: int
    u_vertices: np.ndarray      # mesh vertex index of each u node
    elem_u: np.ndarray          # (M,2) u index of element ends, -1 if none
    sigma_elements: np.ndarray  # elements of Gamma_Sigma
    contact_elements: np.ndarray
    elem_lambda: np.ndarray     # (M,) multiplier index, -1 if none

    @property
    def n_psi(self) -> int:
        return 2 * self.n_elements

    @property
    def n_u(self) -> int:
        return len(self.u_vertices)

    @property
    def n_lambda(self) -> int:
        return len(self.contact_elements)

    @property
    def block_size(self) -> int:
        return 2 * self.n_psi + 2 * self.n_u

    @property
    def psi_slice(self) -> slice:
        return slice(0, 2 * self.n_psi)

    @property
    def u_slice(self) -> slice:
        return slice(2 * self.n_psi, self.block_size)

    def psi_index(self, comp: int, elem: int, local: int) -> int:
        return comp * self.n_psi + 2 * elem + local

    def u_index(self, comp: int, node: int) -> int:
        return 2 * self.n_psi + comp * self.n_u + node

    @property
    def multiplier_length(self) -> int:
        return self.n_steps * 2 * self.n_lambda

    @property
    def normal_idx(self) -> np.ndarray:
        nl = self.n_lambda
        return (np.arange(self.n_steps)[:, None] * 2 * nl + nl + np.arange(nl)).ravel()

    @property
    def tangent_idx(self) -> np.ndarray:
        nl = self.n_lambda
        return (np.arange(self.n_steps)[:, None] * 2 * nl + np.arange(nl)).ravel()


def build_dof_layout(mesh: BoundaryMesh, grid: TimeGrid) -> DofLayout:
    tags = np.asarray(mesh.tags)
    sigma = np.flatnonzero(tags != Region.DIRICHLET)
    contact = np.flatnonzero(tags == Region.CONTACT)
    nv = len(mesh.vertices)
    incident = np.bincount(mesh.elements.ravel(), minlength=nv)
    dirichlet_v = np.zeros(nv, bool)
    dirichlet_v[mesh.elements[tags == Region.DIRICHLET].ravel()] = True
    in_sigma = np.zeros(nv, bool)
    in_sigma[mesh.elements[sigma].ravel()] = True
    # curve endpoints and nodes touching the Dirichlet part carry no u dof
    keep = in_sigma & ~dirichlet_v & (incident >= 2)
    u_vertices = np.flatnonzero(keep)
    vmap = -np.ones(nv, np.int64)
    vmap[u_vertices] = np.arange(len(u_vertices))
    elem_u = vmap[mesh.elements]
    elem_u[tags == Region.DIRICHLET] = -1
    elem_lambda = -np.ones(mesh.n_elements, np.int64)
    elem_lambda[contact] = np.arange(len(contact))
    return DofLayout(mesh.n_elements, grid.n_steps, u_vertices, elem_u,
                     sigma, contact, elem_lambda)


# ---------------------------------------------------------------- CSV i/o

def write_mesh_csv(mesh: BoundaryMesh, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "vertices.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(mesh.vertices):
            w.writerow([i, repr(float(x)), repr(float(y))])
    with open(os.path.join(directory, "elements.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "v0", "v1", "region", "group", "cnx", "cny"])
        for i, (e, tag, grp, cn) in enumerate(zip(mesh.elements, mesh.tags,
                                                  mesh.groups, mesh.contact_normals)):
            w.writerow([i, int(e[0]), int(e[1]), Region(int(tag)).name.lower(), grp,
                        repr(float(cn[0])), repr(float(cn[1]))])


def read_mesh_csv(directory: str) -> BoundaryMesh:
    with open(os.path.join(directory, "vertices.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    verts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    with open(os.path.join(directory, "elements.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    elems = [(int(r["v0"]), int(r["v1"])) for r in rows]
    tags = [r["region"] for r in rows]
    groups = [r.get("group", "") for r in rows]
    cn = [(float(r["cnx"]), float(r["cny"])) for r in rows]
    return make_mesh(verts, elems, tags, groups, cn, meta={"preset": "csv"})
