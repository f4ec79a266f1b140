"""Structured P1 meshes on intervals and rectangles."""
from dataclasses import dataclass, field
import re

import numpy as np

from .errors import InvalidDomain, InvalidResolution, KindMismatch, ShapeError


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    @property
    def dim(self):
        return 1

    @property
    def volume(self):
        return self.b - self.a

    def __str__(self):
        return f"interval({self.a!r},{self.b!r})"


@dataclass(frozen=True)
class Rectangle:
    ax: float
    bx: float
    ay: float
    by: float

    @property
    def dim(self):
        return 2

    @property
    def volume(self):
        return (self.bx - self.ax) * (self.by - self.ay)

    def __str__(self):
        return f"rectangle({self.ax!r},{self.bx!r},{self.ay!r},{self.by!r})"


_DOMAIN_RE = re.compile(r"^\s*(interval|rectangle)\s*\(([^)]*)\)\s*$")


def parse_domain(text):
    """Parse ``interval(a,b)`` or ``rectangle(ax,bx,ay,by)``."""
    m = _DOMAIN_RE.match(text)
    if not m:
        raise InvalidDomain(f"cannot parse domain {text!r}")
    try:
        args = [float(v) for v in m.group(2).split(",")]
    except ValueError:
        raise InvalidDomain(f"non-numeric bounds in {text!r}") from None
    if m.group(1) == "interval":
        if len(args) != 2:
            raise InvalidDomain("interval takes two bounds")
        return Interval(*args)
    if len(args) != 4:
        raise InvalidDomain("rectangle takes four bounds")
    return Rectangle(*args)


@dataclass(eq=False)
class Mesh:
    """Simplicial mesh.

    ``boundary_facets`` holds node-index tuples (points in 1D, edges in 2D);
    ``facet_normals`` the outward unit normal of each facet and
    ``facet_elements`` the unique element containing it.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    facet_normals: np.ndarray
    facet_elements: np.ndarray
    node_boundary_flags: np.ndarray
    domain: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def boundary_nodes(self):
        return np.flatnonzero(self.node_boundary_flags)

    @property
    def interior_nodes(self):
        return np.flatnonzero(~self.node_boundary_flags)

    def interior_dofs(self):
        """Displacement dofs (node * dim + component) not on the boundary."""
        nodes = self.interior_nodes
        return (nodes[:, None] * self.dim + np.arange(self.dim)).ravel()

    def h(self):
        """Longest element edge."""
        return self.cached("h", self._max_edge)

    def _max_edge(self):
        v = self.nodes[self.elements]
        nloc = v.shape[1]
        return max(np.max(np.linalg.norm(v[:, i] - v[:, j], axis=1))
                   for i in range(nloc) for j in range(i + 1, nloc))

    def cached(self, key, factory):
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def to_csv(self, path):
        """Write node coordinates then connectivity, for debugging."""
        with open(path, "w") as fh:
            cols = ["x", "y"][: self.dim]
            fh.write("node_id," + ",".join(cols) + "\n")
            for i, xy in enumerate(self.nodes):
                fh.write(f"{i}," + ",".join(repr(float(c)) for c in xy) + "\n")
            fh.write("element_id," + ",".join(f"n{k}" for k in range(self.elements.shape[1])) + "\n")
            for e, conn in enumerate(self.elements):
                fh.write(f"{e}," + ",".join(str(int(c)) for c in conn) + "\n")


@dataclass
class Field:
    """Nodal coefficient vector of a P1 function.

    Scalar fields have shape (n_nodes,), displacement fields (n_nodes, dim).
    """

    kind: str
    values: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind == "scalar":
            expected = (self.mesh.n_nodes,)
        elif self.kind == "displacement":
            expected = (self.mesh.n_nodes, self.mesh.dim)
        else:
            raise KindMismatch(f"unknown field kind {self.kind!r}")
        if self.values.shape != expected:
            raise ShapeError(f"{self.kind} field needs shape {expected}, got {self.values.shape}")
        if self.kind == "displacement" and np.any(self.values[self.mesh.node_boundary_flags] != 0.0):
            raise ShapeError("displacement field must vanish on boundary nodes")


def build_mesh(domain, resolution):
    """Uniform mesh with ``resolution`` nodes per axis.

    Rectangles are split into right triangles along the (i,j)-(i+1,j+1)
    diagonal, which keeps every angle at most 90 degrees.
    """
    if isinstance(domain, str):
        domain = parse_domain(domain)
    resolution = int(resolution)
    if resolution < 2:
        raise InvalidResolution(f"resolution must be >= 2, got {resolution}")
    if isinstance(domain, Interval):
        return _interval_mesh(domain, resolution)
    if isinstance(domain, Rectangle):
        return _rectangle_mesh(domain, resolution)
    raise InvalidDomain(f"unsupported domain {domain!r}")


def _interval_mesh(dom, n):
    if not (np.isfinite(dom.a) and np.isfinite(dom.b)) or dom.b <= dom.a:
        raise InvalidDomain(f"degenerate interval {dom}")
    x = np.linspace(dom.a, dom.b, n)
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    flags = np.zeros(n, dtype=bool)
    flags[[0, -1]] = True
    return Mesh(
        dim=1,
        nodes=x[:, None],
        elements=elements,
        boundary_facets=np.array([[0], [n - 1]]),
        facet_normals=np.array([[-1.0], [1.0]]),
        facet_elements=np.array([0, n - 2]),
        node_boundary_flags=flags,
        domain=dom,
    )


def _rectangle_mesh(dom, n):
    vals = (dom.ax, dom.bx, dom.ay, dom.by)
    if not all(np.isfinite(vals)) or dom.bx <= dom.ax or dom.by <= dom.ay:
        raise InvalidDomain(f"degenerate rectangle {dom}")
    xs = np.linspace(dom.ax, dom.bx, n)
    ys = np.linspace(dom.ay, dom.by, n)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * n + i

    elements = []
    for j in range(n - 1):
        for i in range(n - 1):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    elements = np.array(elements)

    facets, normals, owners = [], [], []
    for i in range(n - 1):
        # bottom edge lies in the lower triangle of cell (i, 0)
        facets.append((idx(i, 0), idx(i + 1, 0)))
        normals.append((0.0, -1.0))
        owners.append(2 * i)
        # top edge lies in the upper triangle of cell (i, n-2)
        facets.append((idx(i + 1, n - 1), idx(i, n - 1)))
        normals.append((0.0, 1.0))
        owners.append(2 * ((n - 2) * (n - 1) + i) + 1)
    for j in range(n - 1):
        # left edge: upper triangle of cell (0, j); right edge: lower triangle of (n-2, j)
        facets.append((idx(0, j + 1), idx(0, j)))
        normals.append((-1.0, 0.0))
        owners.append(2 * (j * (n - 1)) + 1)
        facets.append((idx(n - 1, j), idx(n - 1, j + 1)))
        normals.append((1.0, 0.0))
        owners.append(2 * (j * (n - 1) + n - 2))
    flags = np.zeros(n * n, dtype=bool)
    flags[np.unique(np.array(facets))] = True
    return Mesh(
        dim=2,
        nodes=nodes,
        elements=elements,
        boundary_facets=np.array(facets),
        facet_normals=np.array(normals),
        facet_elements=np.array(owners),
        node_boundary_flags=flags,
        domain=dom,
    )
