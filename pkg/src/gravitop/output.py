"""File formats for densities, images, volumes and convergence logs.

Density fields go to a plain-text format with a small header followed by
one value per line in element order (x fastest, then y, then z). Values
are printed with 17 significant digits so a write/read round trip
reproduces the float64 array bit for bit.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError

_FIELD_MAGIC = "# gravitop density field v1"

HISTORY_COLUMNS = ("iter", "f0_Nm", "vol_frac", "g1", "g2", "beta", "max_change")


def write_field(path, values: np.ndarray, dim: int, nel: tuple[int, ...],
                lengths: tuple[float, ...], thickness: float = 0.0,
                beta: float | None = None) -> None:
    values = np.asarray(values, dtype=float).ravel()
    lines = [_FIELD_MAGIC,
             f"dim {dim}",
             "nel " + " ".join(str(int(n)) for n in nel),
             "lengths " + " ".join(f"{v!r}" for v in lengths)]
    if dim == 2:
        lines.append(f"thickness {thickness!r}")
    if beta is not None:
        lines.append(f"beta {beta!r}")
    lines.append(f"values {values.size}")
    lines.extend(f"{v:.17g}" for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_field(path) -> tuple[dict, np.ndarray]:
    """Read a density field file; returns (metadata, values)."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != _FIELD_MAGIC:
        raise ConfigError(f"{path} is not a gravitop density field file")
    meta: dict = {}
    idx = 1
    count = None
    while idx < len(text):
        parts = text[idx].split()
        idx += 1
        if not parts:
            continue
        key, rest = parts[0], parts[1:]
        if key == "dim":
            meta["dim"] = int(rest[0])
        elif key == "nel":
            meta["nel"] = tuple(int(v) for v in rest)
        elif key == "lengths":
            meta["lengths"] = tuple(float(v) for v in rest)
        elif key == "thickness":
            meta["thickness"] = float(rest[0])
        elif key == "beta":
            meta["beta"] = float(rest[0])
        elif key == "values":
            count = int(rest[0])
            break
        else:
            raise ConfigError(f"unknown field-file key {key!r} in {path}")
    if count is None or "dim" not in meta or "nel" not in meta:
        raise ConfigError(f"truncated field file header in {path}")
    values = np.array([float(v) for v in text[idx:idx + count]])
    if values.size != count:
        raise ConfigError(f"field file {path} promises {count} values, "
                          f"found {values.size}")
    return meta, values


def field_to_image(values: np.ndarray, nel: tuple[int, ...]) -> np.ndarray:
    """8-bit grayscale image of a 2D field; solid (1.0) renders black and
    the first grid row ends up at the bottom of the image."""
    nelx, nely = nel[0], nel[1]
    grid = np.asarray(values, dtype=float).reshape(nely, nelx)
    img = np.clip(1.0 - grid, 0.0, 1.0)[::-1, :]
    return np.round(255.0 * img).astype(np.uint8)


def write_png(path, values: np.ndarray, nel: tuple[int, ...]) -> None:
    from PIL import Image

    Image.fromarray(field_to_image(values, nel), mode="L").save(str(path))


def write_vtk(path, values: np.ndarray, nel: tuple[int, ...],
              lengths: tuple[float, ...], threshold: float | None = 0.9) -> None:
    """Legacy-format VTK structured-points volume with the density as cell
    data; optionally adds a 0/1 field thresholded for isosurface viewing."""
    nelx, nely, nelz = (list(nel) + [1, 1])[:3]
    spacing = [lengths[i] / nel[i] for i in range(len(nel))]
    spacing += [1.0] * (3 - len(spacing))
    values = np.asarray(values, dtype=float).ravel()
    lines = ["# vtk DataFile Version 3.0",
             "gravitop density field",
             "ASCII",
             "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {nelx + 1} {nely + 1} {nelz + 1}",
             "ORIGIN 0 0 0",
             f"SPACING {spacing[0]:.12g} {spacing[1]:.12g} {spacing[2]:.12g}",
             f"CELL_DATA {values.size}",
             "SCALARS density double 1",
             "LOOKUP_TABLE default"]
    lines.extend(f"{v:.9g}" for v in values)
    if threshold is not None:
        lines.append(f"SCALARS solid_ge_{threshold:g} int 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend("1" if v >= threshold else "0" for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for i in range(len(history)):
            writer.writerow([
                history.iteration[i],
                f"{history.f0[i]:.12e}",
                f"{history.vol_frac[i]:.10f}",
                f"{history.g1[i]:.10e}",
                f"{history.g2[i]:.10e}",
                f"{history.beta[i]:g}",
                f"{history.max_change[i]:.10e}",
            ])


def read_history_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != HISTORY_COLUMNS:
            raise ConfigError(f"unexpected history columns {header} in {path}")
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows) if rows else np.empty((0, len(HISTORY_COLUMNS)))
    return {name: data[:, i] for i, name in enumerate(HISTORY_COLUMNS)}
