"""FFT block-diagonalization of translation-invariant operators on the periodic grid.

On a uniform periodic grid with a constant metric, every operator built from
incidence matrices and diagonal Hodge stars commutes with grid translations.
Such an operator acting on ``nb`` component blocks becomes an ``nb x nb``
matrix per wavevector, so it can be applied and inverted exactly with FFTs.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .grid_complex import GridSpec


class CirculantBlockOperator:
    """Translation-invariant sparse operator on ``nb`` blocks of ``grid.ncell`` values."""

    def __init__(self, grid: GridSpec, matrix: sp.spmatrix, check: bool = True):
        N = grid.ncell
        rows, cols = matrix.shape
        if rows != cols or rows % N:
            raise ValueError("operator must be square with whole component blocks")
        self.grid = grid
        self.nb = rows // N
        self.matrix = sp.csr_matrix(matrix)
        # impulse responses of the first entity of each block give the symbol
        impulses = self.matrix[:, [a * N for a in range(self.nb)]].toarray()
        kernel = impulses.T.reshape(self.nb, self.nb, *grid.n)  # [src, dst, ...]
        symbol = np.fft.fftn(kernel, axes=(2, 3, 4))
        self._symbol = np.moveaxis(symbol, (0, 1), (-1, -2))  # [..., dst, src]
        self._inverse = None
        if check:
            x = np.random.default_rng(12345).standard_normal(rows)
            ref = self.matrix @ x
            err = np.max(np.abs(self.apply(x) - ref))
            if err > 1e-9 * max(1.0, np.max(np.abs(ref))):
                raise ValueError("operator is not translation invariant on this grid")

    def _to_hat(self, x: np.ndarray) -> np.ndarray:
        xh = np.fft.fftn(x.reshape(self.nb, *self.grid.n), axes=(1, 2, 3))
        return np.moveaxis(xh, 0, -1)[..., None]

    def _from_hat(self, yh: np.ndarray) -> np.ndarray:
        y = np.fft.ifftn(np.moveaxis(yh[..., 0], -1, 0), axes=(1, 2, 3))
        return y.real.ravel()

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self._from_hat(self._symbol @ self._to_hat(x))

    def solve(self, y: np.ndarray) -> np.ndarray:
        if self._inverse is None:
            self._inverse = np.linalg.inv(self._symbol)
        return self._from_hat(self._inverse @ self._to_hat(y))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.solve(y)
