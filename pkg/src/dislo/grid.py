"""Regular node grid over the closed unit cube (reference configuration)."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """n_cells intervals per axis, n_cells + 1 nodes per axis, spacing 1/n_cells."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 1:
            raise ValueError("grid needs at least one cell per axis")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_axis(self) -> int:
        return self.n_cells + 1

    @property
    def shape(self):
        n = self.n_axis
        return (n, n, n)

    @property
    def n_nodes(self) -> int:
        return self.n_axis ** 3

    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_axis)

    def points(self) -> np.ndarray:
        """All node coordinates, C order, shape (n_nodes, 3)."""
        ax = self.axis()
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def cell_volume(self) -> float:
        return self.h ** 3
