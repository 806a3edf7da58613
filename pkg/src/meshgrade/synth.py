"""
Synthetic labelled meshes.

Structured quadrilateral grids are mapped onto a flat, bent or folded
surface, a seeded set of elements is damaged with one of five geometric
defects, and the ground truth is widened around each defect the way human
reviewers tend to mark a few adjacent elements too.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from loguru import logger
from scipy.sparse import csgraph

from .config import (
    BENCH_GRID_RANGE, BENCH_MESH_COUNT, BENCH_REWORK_SHARE, DEFAULT_DILATION_RADIUS,
    DEFAULT_SEED, DEFAULT_SEVERITY, DEFAULT_SPACING, DEFECT_ESCALATION_STEPS, DEFECT_RETRY_CAP,
    MANIFEST_FORMAT_VERSION, DefectKind, Surface
)
from .errors import ConfigError, DefectPlacementError
from .graph import build_graph, k_ring
from .mesh import Element, LabeledMesh, LabelSet, Mesh, Node, read_mesh, write_mesh
from .metrics import aspect_ratio, element_area, skewness, warpage

DEFAULT_RIDGE_ANGLE = 30.0
ESCALATION_FACTOR = 1.25


@dataclass(frozen=True)
class DefectSpec:
    """``count`` defects of one kind; see DEFAULT_SEVERITY for the units."""
    kind: DefectKind
    count: int = 1
    severity: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', DefectKind(self.kind))
        if self.severity is None:
            object.__setattr__(self, 'severity', DEFAULT_SEVERITY[self.kind])

    def to_dict(self):
        return {'kind': self.kind.value, 'count': self.count, 'severity': self.severity}


@dataclass(frozen=True)
class SynthSpec:
    """
    Recipe of one synthetic mesh.

    ``radius`` bends a cylinder surface (default: a half turn over the grid
    width); ``ridge_angle`` folds a ridge surface along its middle node
    column, in degrees. ``bridge_gap`` > 0 also marks the shortest element
    path between rework groups separated by at most that many elements.
    """
    rows: int
    cols: int
    spacing: float = DEFAULT_SPACING
    surface: Surface = Surface.FLAT
    radius: Optional[float] = None
    ridge_angle: float = DEFAULT_RIDGE_ANGLE
    defects: tuple = field(default_factory=tuple)
    dilation_radius: int = DEFAULT_DILATION_RADIUS
    bridge_gap: int = 0
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, 'surface', Surface(self.surface))
        object.__setattr__(self, 'defects', tuple(
            d if isinstance(d, DefectSpec) else DefectSpec(**d) for d in self.defects))

    @property
    def capacity(self):
        return self.rows * self.cols

    @property
    def bend_radius(self):
        if self.radius is not None:
            return self.radius
        return self.cols * self.spacing / math.pi

    def validate(self):
        """
        Raises:
            ConfigError: For impossible grids, surfaces or severities.
            DefectPlacementError: If the defects cannot fit on the grid.
        """
        if self.rows < 2 or self.cols < 2:
            raise ConfigError(f"grid needs at least 2 rows and 2 columns, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing}")
        if self.dilation_radius < 0 or self.bridge_gap < 0:
            raise ConfigError("dilation radius and bridge gap must be non-negative")
        if self.surface is Surface.CYLINDER:
            if not self.bend_radius > 0 or self.cols * self.spacing / self.bend_radius >= 2 * math.pi:
                raise ConfigError(f"bend radius {self.bend_radius} wraps the grid onto itself")
        if self.surface is Surface.RIDGE and not 0 <= self.ridge_angle < 180:
            raise ConfigError(f"ridge angle must lie in [0, 180), got {self.ridge_angle}")
        for defect in self.defects:
            if defect.count < 0 or not defect.severity > 0:
                raise ConfigError(f"{defect.kind.value}: count must be >= 0 and severity > 0")
            if defect.kind is DefectKind.SHRUNK and not defect.severity < 1:
                raise ConfigError("shrunk severity is the removed area fraction, below 1")
            if defect.kind in (DefectKind.SKEWED, DefectKind.WARPED) and not defect.severity < 90:
                raise ConfigError(f"{defect.kind.value} severity must be below 90 degrees")
        total = sum(d.count for d in self.defects)
        if total > self.capacity:
            raise DefectPlacementError(f"{total} defects do not fit on {self.capacity} elements")
        return self

    def to_dict(self):
        return {
            'rows': self.rows, 'cols': self.cols, 'spacing': self.spacing,
            'surface': self.surface.value, 'radius': self.radius, 'ridge_angle': self.ridge_angle,
            'defects': [d.to_dict() for d in self.defects],
            'dilation_radius': self.dilation_radius, 'bridge_gap': self.bridge_gap,
            'seed': self.seed,
        }


def _surface_points(spec, u, v):
    """Map grid coordinates onto the chosen surface."""
    if spec.surface is Surface.CYLINDER:
        radius = spec.bend_radius
        return np.stack([radius * np.sin(u / radius), v, radius * (1 - np.cos(u / radius))], axis=1)
    if spec.surface is Surface.RIDGE:
        fold = (spec.cols // 2) * spec.spacing
        angle = math.radians(spec.ridge_angle)
        beyond = np.maximum(u - fold, 0.0)
        x = np.where(u > fold, fold + beyond * math.cos(angle), u)
        return np.stack([x, v, beyond * math.sin(angle)], axis=1)
    return np.stack([u, v, np.zeros_like(u)], axis=1)


def generate_grid(spec):
    """
    Structured quadrilateral grid on the recipe's surface, all elements passed.

    Node (r, c) has id r*(cols+1) + c + 1 and element (r, c) has id
    r*cols + c + 1; elements wind counter-clockwise seen from +z.

    Args:
        spec (SynthSpec): Grid recipe

    Returns:
        tuple: (Mesh, LabelSet)
    """
    spec.validate()
    r, c = np.meshgrid(np.arange(spec.rows + 1), np.arange(spec.cols + 1), indexing='ij')
    points = _surface_points(spec, c.ravel() * spec.spacing, r.ravel() * spec.spacing)
    nodes = tuple(Node(i + 1, tuple(float(x) for x in p)) for i, p in enumerate(points))

    def node_id(row, col):
        return row * (spec.cols + 1) + col + 1

    elements = tuple(
        Element(row * spec.cols + col + 1,
                (node_id(row, col), node_id(row, col + 1), node_id(row + 1, col + 1), node_id(row + 1, col)))
        for row in range(spec.rows) for col in range(spec.cols)
    )
    mesh = Mesh(nodes, elements)
    return mesh, LabelSet.uniform(mesh.element_ids)


# ---------------------------------------------------------------------------
# Defects
# ---------------------------------------------------------------------------

def _single_element(points):
    nodes = tuple(Node(i + 1, tuple(float(x) for x in p)) for i, p in enumerate(points))
    element = Element(1, tuple(range(1, len(points) + 1)))
    return element, Mesh(nodes, (element,))


def _measure(kind, points):
    element, mesh = _single_element(points)
    if kind is DefectKind.SLIVER:
        return aspect_ratio(element, mesh)
    if kind is DefectKind.SKEWED:
        return skewness(element, mesh)
    if kind is DefectKind.WARPED:
        return warpage(element, mesh)
    return element_area(element, mesh)


def _initial_magnitude(kind, severity):
    if kind is DefectKind.SLIVER:
        return severity / (1 + severity)                # height fraction removed
    if kind is DefectKind.SHRUNK:
        return 1 - math.sqrt(1 - severity)              # contraction towards the centroid
    return math.tan(math.radians(severity))             # shear or lift per unit edge length


def _escalate(kind, magnitude):
    if kind in (DefectKind.SLIVER, DefectKind.SHRUNK):
        return 1 - (1 - magnitude) / ESCALATION_FACTOR
    return magnitude * ESCALATION_FACTOR


def _deform(kind, points, magnitude):
    """Damaged copy of one quadrilateral's node positions (winding order)."""
    p = points.copy()
    if kind is DefectKind.SLIVER:
        p[3] += magnitude * (points[0] - points[3])
        p[2] += magnitude * (points[1] - points[2])
    elif kind is DefectKind.SKEWED:
        shift = magnitude * np.linalg.norm(points[3] - points[0])
        direction = (points[1] - points[0]) / np.linalg.norm(points[1] - points[0])
        p[2] += shift * direction
        p[3] += shift * direction
    elif kind is DefectKind.WARPED:
        normal = np.cross(points[2] - points[0], points[3] - points[1])
        normal /= np.linalg.norm(normal)
        p[2] += magnitude * np.linalg.norm(points[2] - points[1]) * normal
    elif kind is DefectKind.SHRUNK:
        centroid = points.mean(axis=0)
        p += magnitude * (centroid - points)
    return p


def _reached(kind, before, after, severity):
    if kind is DefectKind.SHRUNK:
        return after <= (1 - severity) * before
    return after - before >= severity


def _damage(kind, points, severity):
    """Escalate a defect until its metric moved by the severity margin."""
    before = _measure(kind, points)
    magnitude = _initial_magnitude(kind, severity)
    for _ in range(DEFECT_ESCALATION_STEPS):
        damaged = _deform(kind, points, magnitude)
        if _reached(kind, before, _measure(kind, damaged), severity):
            return damaged
        magnitude = _escalate(kind, magnitude)
    raise DefectPlacementError(f"{kind.value} defect of severity {severity} could not be realised")


def _draw_target(rng, candidates, taken, used_nodes, connectivity):
    """Random quad not yet damaged, preferring ones that share no damaged node."""
    for strict in (True, False):
        for _ in range(DEFECT_RETRY_CAP):
            position = int(candidates[rng.integers(len(candidates))])
            if position in taken:
                continue
            if strict and used_nodes.intersection(connectivity[position].tolist()):
                continue
            return position
    raise DefectPlacementError(f"no free element after {DEFECT_RETRY_CAP} draws")


def inject_defects(mesh, spec):
    """
    Damage seeded target elements of a mesh.

    Args:
        mesh (Mesh): Quad grid, typically from ``generate_grid``
        spec (SynthSpec): Defect list and seed

    Returns:
        tuple: (damaged Mesh, sorted list of defect element ids). Triangulated
               quads yield two ids, the original and a new one.

    Raises:
        DefectPlacementError: If targets or magnitudes cannot be found.
    """
    spec.validate()
    kinds = [d for d in spec.defects for _ in range(d.count)]
    if not kinds:
        return mesh, []

    rng = np.random.default_rng(spec.seed)
    connectivity = mesh.connectivity
    candidates = np.nonzero(~mesh.triangle_mask)[0]
    if len(kinds) > len(candidates):
        raise DefectPlacementError(f"{len(kinds)} defects but only {len(candidates)} quadrilaterals")
    coordinates = mesh.coordinates.copy()
    taken, used_nodes = set(), set()
    split = []

    for defect in kinds:
        position = _draw_target(rng, candidates, taken, used_nodes, connectivity)
        taken.add(position)
        rows = connectivity[position]
        used_nodes.update(rows.tolist())
        if defect.kind is DefectKind.TRIANGULATED:
            split.append(position)
            continue
        coordinates[rows] = _damage(defect.kind, coordinates[rows], defect.severity)

    damaged = mesh.with_positions(coordinates)
    defect_ids = [int(mesh.element_ids[p]) for p in sorted(taken)]
    if split:
        elements = list(damaged.elements)
        next_id = int(mesh.element_ids.max()) + 1
        for position in sorted(split):
            a, b, c, d = elements[position].node_ids
            elements[position] = Element(elements[position].id, (a, b, c))
            elements.append(Element(next_id, (a, c, d)))
            defect_ids.append(next_id)
            next_id += 1
        damaged = Mesh(damaged.nodes, tuple(elements))

    logger.debug(f"injected {len(kinds)} defects, {len(defect_ids)} damaged elements")
    return damaged, sorted(defect_ids)


# ---------------------------------------------------------------------------
# Labels
# ---------------------------------------------------------------------------

def dilate_labels(mesh, defect_ids, radius=DEFAULT_DILATION_RADIUS, graph=None):
    """
    Rework labels covering the ``radius``-ring of every defect element.

    Args:
        mesh (Mesh): Damaged mesh
        defect_ids (iterable): Defect element ids
        radius (int): Ring radius, 0 for the defects alone
        graph (NeighbourhoodGraph): Graph of ``mesh``; built when omitted

    Returns:
        LabelSet: Every element of ``mesh`` labelled.
    """
    graph = graph if graph is not None else build_graph(mesh)
    rework = set()
    for element_id in defect_ids:
        rework |= k_ring(graph, element_id, radius)
    return LabelSet.from_rework(mesh.element_ids, rework)


def bridge_labels(mesh, rework_ids, max_gap, graph=None):
    """
    Elements on shortest paths joining nearby rework groups.

    Two connected groups of rework elements separated by at most ``max_gap``
    passed elements get the elements between them marked as well.

    Args:
        mesh (Mesh): Labelled mesh
        rework_ids (iterable): Current rework element ids
        max_gap (int): Largest number of elements to bridge
        graph (NeighbourhoodGraph): Graph of ``mesh``; built when omitted

    Returns:
        frozenset: Element ids to add (disjoint from ``rework_ids``).
    """
    graph = graph if graph is not None else build_graph(mesh)
    rows = np.array(sorted(graph.position[int(e)] for e in rework_ids), dtype=np.int64)
    if max_gap < 1 or len(rows) == 0:
        return frozenset()
    adjacency = graph.adjacency
    n_groups, group = csgraph.connected_components(adjacency[rows][:, rows], directed=False)
    bridge = set()
    for first in range(n_groups):
        sources = rows[group == first]
        distance, predecessor, _ = csgraph.dijkstra(
            adjacency, directed=False, indices=sources, unweighted=True,
            limit=max_gap + 1, min_only=True, return_predecessors=True)
        for second in range(first + 1, n_groups):
            targets = rows[group == second]
            reach = distance[targets]
            nearest = int(targets[np.argmin(reach)])
            if not 2 <= distance[nearest] <= max_gap + 1:
                continue
            step = int(predecessor[nearest])
            while step >= 0 and distance[step] > 0:
                bridge.add(int(graph.element_ids[step]))
                step = int(predecessor[step])
    return frozenset(bridge - set(int(e) for e in rework_ids))


def generate_labeled_mesh(spec, mesh_id=None):
    """
    Grid, defects and labels in one step.

    Args:
        spec (SynthSpec): Recipe
        mesh_id (str): Identifier; defaults to ``synth-<seed>``

    Returns:
        LabeledMesh: The damaged mesh with its ground truth.
    """
    mesh, _ = generate_grid(spec)
    mesh, defect_ids = inject_defects(mesh, spec)
    graph = build_graph(mesh)
    labels = dilate_labels(mesh, defect_ids, spec.dilation_radius, graph)
    if spec.bridge_gap:
        extra = bridge_labels(mesh, labels.rework_ids, spec.bridge_gap, graph)
        labels = LabelSet.from_rework(mesh.element_ids, labels.rework_ids | extra)
    return LabeledMesh(mesh_id or f"synth-{spec.seed}", mesh, labels)


# ---------------------------------------------------------------------------
# Benchmark corpus
# ---------------------------------------------------------------------------

def _mean_span(n, radius):
    """Mean number of grid lines within ``radius`` of a line, over all n lines."""
    i = np.arange(n)
    return float(np.mean(np.minimum(i + radius, n - 1) - np.maximum(i - radius, 0) + 1))


def benchmark_specs(n_meshes=BENCH_MESH_COUNT, seed=DEFAULT_SEED, rework_share=BENCH_REWORK_SHARE,
                    grid_range=BENCH_GRID_RANGE, dilation_radius=DEFAULT_DILATION_RADIUS):
    """
    Recipes of the synthetic benchmark corpus.

    Grid sizes, surfaces and defect kinds are drawn per mesh; the number of
    defects is chosen by stochastic rounding so that the expected rework
    share, after dilation, is ``rework_share``. Some meshes get no defect.

    Args:
        n_meshes (int): Corpus size
        seed (int): Corpus seed
        rework_share (float): Targeted overall share of rework elements
        grid_range (tuple): Inclusive bounds for rows and cols
        dilation_radius (int): Label dilation radius

    Returns:
        list: (mesh id, SynthSpec) pairs.
    """
    rng = np.random.default_rng(seed)
    low, high = grid_range
    kinds = list(DefectKind)
    surfaces = list(Surface)
    specs = []
    for index in range(n_meshes):
        rows, cols = (int(x) for x in rng.integers(low, high + 1, size=2))
        surface = surfaces[int(rng.integers(len(surfaces)))]
        radius = cols * DEFAULT_SPACING / math.pi * float(rng.uniform(1.5, 4.0))
        ridge_angle = round(float(rng.uniform(15.0, 60.0)), 3)
        cells = _mean_span(rows, dilation_radius) * _mean_span(cols, dilation_radius)
        expected = rework_share * rows * cols / cells
        count = int(math.floor(expected + rng.random()))
        drawn = rng.integers(len(kinds), size=count)
        defects = tuple(DefectSpec(kinds[k], int(np.sum(drawn == k)))
                        for k in range(len(kinds)) if np.any(drawn == k))
        spec = SynthSpec(
            rows=rows, cols=cols, surface=surface,
            radius=round(radius, 6) if surface is Surface.CYLINDER else None,
            ridge_angle=ridge_angle if surface is Surface.RIDGE else DEFAULT_RIDGE_ANGLE,
            defects=defects, dilation_radius=dilation_radius,
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        )
        specs.append((f"bench-{index:03d}", spec))
    return specs


def write_benchmark(directory, specs, progress=None):
    """
    Generate and store a corpus with its manifest.

    Writes ``<mesh id>.mesh.json`` per mesh (labels embedded) and
    ``manifest.yaml`` listing every file with its recipe.

    Args:
        directory (str or Path): Output directory
        specs (list): (mesh id, SynthSpec) pairs, e.g. from ``benchmark_specs``
        progress (callable): Called as progress(stage, done, total)

    Returns:
        dict: The manifest.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for done, (mesh_id, spec) in enumerate(specs, start=1):
        labeled = generate_labeled_mesh(spec, mesh_id)
        file_name = f"{mesh_id}.mesh.json"
        write_mesh(directory / file_name, labeled.mesh, labeled.labels)
        entries.append({
            'mesh_id': mesh_id,
            'file': file_name,
            'elements': len(labeled.mesh),
            'rework': len(labeled.labels.rework_ids),
            'spec': spec.to_dict(),
        })
        if progress is not None:
            progress('synth', done, len(specs))

    n_elements = sum(e['elements'] for e in entries)
    n_rework = sum(e['rework'] for e in entries)
    manifest = {
        'format': MANIFEST_FORMAT_VERSION,
        'meshes': len(entries),
        'elements': n_elements,
        'rework_share': round(n_rework / n_elements, 6) if n_elements else 0.0,
        'entries': entries,
    }
    (directory / 'manifest.yaml').write_text(yaml.safe_dump(manifest, sort_keys=False), encoding='utf-8')
    logger.info(f"wrote {len(entries)} meshes to {directory}")
    return manifest


def read_benchmark(directory):
    """
    Load every mesh listed in a benchmark manifest.

    Returns:
        list: LabeledMesh entries in manifest order.
    """
    directory = Path(directory)
    try:
        manifest = yaml.safe_load((directory / 'manifest.yaml').read_text(encoding='utf-8'))
    except UnicodeDecodeError:
        manifest = None
    if not isinstance(manifest, dict) or manifest.get('format') != MANIFEST_FORMAT_VERSION:
        raise ConfigError(f"{directory} has no {MANIFEST_FORMAT_VERSION} manifest")
    meshes = []
    for entry in manifest['entries']:
        mesh, labels = read_mesh(directory / entry['file'])
        meshes.append(LabeledMesh(entry['mesh_id'], mesh, labels))
    return meshes
