"""Periodic hypercubic lattices on the flat torus.

Sites are numbered lexicographically with the last axis fastest (C order).
Links are ``site * d + mu`` and plaquettes ``site * n_planes + plane``, where
``plane`` enumerates the pairs ``mu < nu`` in order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class LatticeSpec:
    extents: tuple[int, ...]
    h: float = 1.0
    d: int = field(init=False)

    def __post_init__(self):
        extents = tuple(int(n) for n in self.extents)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "d", len(extents))
        if self.d not in (2, 3, 4):
            raise ValueError(f"dimension must be 2, 3 or 4, got {self.d}")
        if min(extents) < 3:
            raise ValueError("every extent must be at least 3")
        if not self.h > 0:
            raise ValueError("spacing must be positive")

    @property
    def volume(self) -> int:
        return int(np.prod(self.extents))

    @property
    def n_links(self) -> int:
        return self.d * self.volume

    @cached_property
    def planes(self) -> tuple[tuple[int, int], ...]:
        return tuple(combinations(range(self.d), 2))

    @property
    def n_plaquettes(self) -> int:
        return len(self.planes) * self.volume

    @property
    def weight(self) -> float:
        """Cell volume ``h**d`` used in every discrete integral."""
        return self.h**self.d

    @property
    def physical_volume(self) -> float:
        return self.weight * self.volume

    def coords(self, site) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(site, self.extents))

    def index(self, coords) -> int:
        wrapped = [c % n for c, n in zip(coords, self.extents)]
        return int(np.ravel_multi_index(wrapped, self.extents))

    @cached_property
    def _shift_tables(self) -> np.ndarray:
        grid = np.arange(self.volume).reshape(self.extents)
        tables = np.empty((2, self.d, self.volume), dtype=np.intp)
        for mu in range(self.d):
            # value at x is the index of x + mu (forward) / x - mu (backward)
            tables[0, mu] = np.roll(grid, -1, axis=mu).ravel()
            tables[1, mu] = np.roll(grid, 1, axis=mu).ravel()
        tables.setflags(write=False)
        return tables

    @property
    def fwd(self) -> np.ndarray:
        """``fwd[mu][x]`` is the site ``x + mu_hat``."""
        return self._shift_tables[0]

    @property
    def bwd(self) -> np.ndarray:
        return self._shift_tables[1]

    def shift(self, site: int, mu: int, sign: int = 1) -> int:
        if not 0 <= mu < self.d:
            raise ValueError(f"direction {mu} out of range")
        table = self.fwd if sign > 0 else self.bwd
        return int(table[mu][site])

    def link_index(self, site: int, mu: int) -> int:
        return site * self.d + mu

    def plaquette_index(self, site: int, mu: int, nu: int) -> int:
        return site * len(self.planes) + self.planes.index((mu, nu))

    def plaquette_links(self, site: int, mu: int, nu: int):
        """Oriented boundary ``[(link, +1|-1), ...]`` traversed counterclockwise."""
        if not mu < nu < self.d:
            raise ValueError("plaquette requires mu < nu < d")
        x_mu = self.shift(site, mu)
        x_nu = self.shift(site, nu)
        return [
            (self.link_index(site, mu), 1),
            (self.link_index(x_mu, nu), 1),
            (self.link_index(x_nu, mu), -1),
            (self.link_index(site, nu), -1),
        ]

    def wave_numbers(self) -> np.ndarray:
        """Eigenvalues of the scalar lattice Laplacian, shaped like ``extents``."""
        lam = np.zeros(self.extents)
        for mu, n in enumerate(self.extents):
            k = 4.0 * np.sin(np.pi * np.arange(n) / n) ** 2 / self.h**2
            shape = [1] * self.d
            shape[mu] = n
            lam = lam + k.reshape(shape)
        return lam
