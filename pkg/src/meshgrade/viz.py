"""
Per-element result export.

Writes legacy ASCII VTK unstructured grids with one scalar field per
result column, for inspection in ParaView, and renders quick PNG overlays
with pygame: elements shaded by probability of rework or coloured by
outcome (blue TP, grey TN, orange FP, red FN).
"""
from pathlib import Path

import numpy as np
import pygame
from loguru import logger

from .config import (
    BACKGROUND, EDGE_COLOR, OUTCOME_COLORS, OVERLAY_MARGIN, OVERLAY_SIZE,
    PROBABILITY_COLORS, Outcome
)
from .errors import DimensionMismatchError

VTK_TRIANGLE = 5
VTK_QUAD = 9


def outcomes(predicted, ground_truth):
    """
    Agreement category per element.

    Args:
        predicted (np.ndarray): True where rework was predicted
        ground_truth (np.ndarray): 1 for rework, 0 for passed

    Returns:
        np.ndarray: Outcome values (TP=0, TN=1, FP=2, FN=3).
    """
    predicted = np.asarray(predicted).astype(bool)
    actual = np.asarray(ground_truth).astype(bool)
    codes = np.where(predicted,
                     np.where(actual, Outcome.TP.value, Outcome.FP.value),
                     np.where(actual, Outcome.FN.value, Outcome.TN.value))
    return codes.astype(np.int64)


def element_fields(probabilities, threshold, ground_truth=None):
    """
    Scalar fields of a prediction, in element-id order.

    Returns:
        dict: ``probability``, ``predicted`` and, with ground truth,
              ``ground_truth`` and ``outcome``.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    predicted = probabilities >= threshold
    fields = {'probability': probabilities, 'predicted': predicted.astype(np.int64)}
    if ground_truth is not None:
        fields['ground_truth'] = np.asarray(ground_truth).astype(np.int64)
        fields['outcome'] = outcomes(predicted, ground_truth)
    return fields


def vtk_text(mesh, fields, title="meshgrade result"):
    """
    Legacy ASCII VTK unstructured grid with per-cell scalars.

    Args:
        mesh (Mesh): Mesh whose elements are the cells
        fields (dict): Name -> array of one value per element (element-id order)
        title (str): Header line

    Returns:
        str: The VTK document.

    Raises:
        DimensionMismatchError: If a field does not have one value per element.
    """
    n_cells = len(mesh.elements)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(mesh.nodes)} double"]
    lines.extend(" ".join(repr(float(c)) for c in xyz) for xyz in mesh.coordinates)

    rows = mesh.connectivity
    arity = np.where(mesh.triangle_mask, 3, 4)
    lines.append(f"CELLS {n_cells} {int(np.sum(arity + 1))}")
    lines.extend(f"{k} " + " ".join(str(i) for i in row[:k]) for row, k in zip(rows, arity))
    lines.append(f"CELL_TYPES {n_cells}")
    lines.extend(str(VTK_TRIANGLE if k == 3 else VTK_QUAD) for k in arity)

    if fields:
        lines.append(f"CELL_DATA {n_cells}")
    for name, values in fields.items():
        values = np.asarray(values)
        if values.shape != (n_cells,):
            raise DimensionMismatchError(f"field {name} has {values.size} values for {n_cells} cells")
        if values.dtype.kind == 'f':
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines.extend(repr(float(v)) for v in values)
        else:
            lines += [f"SCALARS {name} int 1", "LOOKUP_TABLE default"]
            lines.extend(str(int(v)) for v in values)
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh, fields, title="meshgrade result"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(vtk_text(mesh, fields, title), encoding='utf-8')
    logger.info(f"wrote {len(fields)} cell fields to {path}")


def outcome_colors(codes):
    """RGB colour per outcome code."""
    return [OUTCOME_COLORS[Outcome(int(code))] for code in codes]


def probability_colors(probabilities):
    """RGB colour per probability, blending from the low to the high colour."""
    low = np.array(PROBABILITY_COLORS['low'], dtype=float)
    high = np.array(PROBABILITY_COLORS['high'], dtype=float)
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, 1.0)[:, None]
    return [tuple(int(round(c)) for c in rgb) for rgb in low + p * (high - low)]


def project(mesh, size=OVERLAY_SIZE, margin=OVERLAY_MARGIN):
    """
    Orthographic screen coordinates on the mesh's best-fit plane.

    Args:
        mesh (Mesh): Mesh to draw
        size (tuple): Image (width, height) in pixels
        margin (int): Border in pixels

    Returns:
        tuple: ((n_nodes, 2) pixel positions, (n_nodes,) depth along the plane normal)
    """
    points = mesh.coordinates - mesh.coordinates.mean(axis=0)
    _, _, axes = np.linalg.svd(points, full_matrices=False)
    planar = points @ axes[:2].T
    depth = points @ axes[2] if len(axes) > 2 else np.zeros(len(points))
    extent = np.ptp(planar, axis=0)
    extent[extent <= 0] = 1.0
    scale = min((size[0] - 2 * margin) / extent[0], (size[1] - 2 * margin) / extent[1])
    screen = (planar - planar.min(axis=0)) * scale + margin
    screen[:, 1] = size[1] - screen[:, 1]
    return screen, depth


def render_overlay(mesh, colors, size=OVERLAY_SIZE, margin=OVERLAY_MARGIN):
    """
    Draw filled elements onto an off-screen surface, far elements first.

    Args:
        mesh (Mesh): Mesh to draw
        colors (list): One RGB tuple per element, element-id order
        size (tuple): Image (width, height)
        margin (int): Border in pixels

    Returns:
        pygame.Surface: The rendered image.
    """
    if len(colors) != len(mesh.elements):
        raise DimensionMismatchError(f"{len(colors)} colours for {len(mesh.elements)} elements")
    surface = pygame.Surface(size)
    surface.fill(BACKGROUND)
    screen, depth = project(mesh, size, margin)
    rows = mesh.connectivity
    arity = np.where(mesh.triangle_mask, 3, 4)
    centre_depth = np.array([depth[row[:k]].mean() for row, k in zip(rows, arity)])
    for position in np.argsort(centre_depth, kind='stable'):
        polygon = [tuple(screen[i]) for i in rows[position][:arity[position]]]
        pygame.draw.polygon(surface, colors[position], polygon)
        pygame.draw.polygon(surface, EDGE_COLOR, polygon, 1)
    return surface


def save_overlay(path, mesh, colors, size=OVERLAY_SIZE):
    """Render an overlay and save it as an image (format from the suffix)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pygame.image.save(render_overlay(mesh, colors, size), str(path))
    logger.info(f"saved overlay to {path}")
