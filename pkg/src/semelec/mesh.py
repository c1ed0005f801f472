"""Two-region 1D vertex grid with a shared interface node at x' = 0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Sorted nodes ``x[0] < ... < x[M]`` with ``x[interface_index] == 0``.

    Semiconductor quantities live on nodes ``0..s`` and electrolyte
    quantities on ``s..M`` (``s`` = interface index); the interface node
    belongs to both.
    """

    nodes: np.ndarray
    interface_index: int

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)
        if np.any(np.diff(x) <= 0):
            raise ConfigError("mesh nodes must be strictly increasing")
        if x[self.interface_index] != 0.0:
            raise ConfigError("interface node must sit exactly at x' = 0")

    @property
    def n_nodes(self):
        return self.nodes.size

    @property
    def spacings(self):
        return np.diff(self.nodes)

    @property
    def x_semi(self):
        return self.nodes[: self.interface_index + 1]

    @property
    def x_elec(self):
        return self.nodes[self.interface_index :]

    @property
    def h_semi(self):
        return np.diff(self.x_semi)

    @property
    def h_elec(self):
        return np.diff(self.x_elec)

    @property
    def region(self):
        tags = np.full(self.n_nodes, "S", dtype="<U1")
        tags[self.interface_index + 1 :] = "E"
        tags[self.interface_index] = "I"
        return tags

    def volumes_semi(self):
        """Control-volume widths of semiconductor nodes (half cells at both ends)."""
        return _dual_volumes(self.h_semi)

    def volumes_elec(self):
        return _dual_volumes(self.h_elec)

    def volumes(self):
        return _dual_volumes(self.spacings)

    def semiconductor_half(self):
        """The semiconductor part as its own mesh, interface node last."""
        return self.x_semi.copy()

    def same_as(self, other):
        return (
            self.interface_index == other.interface_index
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )


def _dual_volumes(h):
    vol = np.zeros(h.size + 1)
    vol[:-1] += 0.5 * h
    vol[1:] += 0.5 * h
    return vol


def _graded_widths(length, n, grading_ratio):
    """Cell widths growing geometrically away from the interface.

    ``grading_ratio`` is the ratio of the largest to the smallest cell in the
    region, so consecutive cells grow by ``grading_ratio ** (1 / (n - 1))``.
    """
    if grading_ratio == 1.0 or n == 1:
        return np.full(n, length / n)
    q = grading_ratio ** (1.0 / (n - 1))
    w = q ** np.arange(n)
    return length * w / w.sum()


def build_mesh(x_left, x_right, n_per_region=200, grading_ratio=1.15):
    """Build a graded two-region mesh with the smallest cells abutting x' = 0."""
    if not (x_left < 0.0 < x_right):
        raise ConfigError("need x_left < 0 < x_right (degenerate region)")
    if n_per_region < 4:
        raise ConfigError("n_per_region must be at least 4")
    if grading_ratio < 1.0:
        raise ConfigError("grading_ratio must be >= 1")
    n = int(n_per_region)
    w_s = _graded_widths(-x_left, n, grading_ratio)
    w_e = _graded_widths(x_right, n, grading_ratio)
    left = -np.cumsum(w_s)[::-1]
    left[0] = x_left
    right = np.cumsum(w_e)
    right[-1] = x_right
    nodes = np.concatenate([left, [0.0], right])
    return Mesh1D(nodes, interface_index=n)


def face_average(values, face_index, mode="arithmetic"):
    """Mean of the two nodal values adjacent to interior face ``face_index``.

    Face ``i`` joins nodes ``i`` and ``i + 1``; the first and last faces
    touch boundary nodes and are rejected.
    """
    values = np.asarray(values, dtype=float)
    if face_index <= 0 or face_index >= values.size - 2:
        raise ValueError(f"face {face_index} is a boundary face")
    a, b = values[face_index], values[face_index + 1]
    if mode == "arithmetic":
        return 0.5 * (a + b)
    if mode == "harmonic":
        if a == 0.0 or b == 0.0:
            return 0.0
        return 2.0 * a * b / (a + b)
    raise ValueError(f"unknown averaging mode {mode!r}")
