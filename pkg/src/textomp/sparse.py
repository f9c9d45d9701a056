"""Column-major sparse matrix storage and the inner-product kernels.

Every solver's hot loop is "correlate each column with a residual vector",
so the storage is CSC-like: one contiguous (row, value) run per column.
Matrices are immutable after construction and safe to share across threads.

Per-column sums always run left-to-right over the stored entries, so
``col_dot`` and ``correlations`` agree bit-for-bit and results do not
depend on the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

_n_threads = 1
_CHUNK_COLS = 8192  # fixed chunk width: results never depend on thread count


def set_num_threads(n):
    """Set the worker count used for the column-correlation scan."""
    global _n_threads
    _n_threads = max(1, int(n))


def get_num_threads():
    return _n_threads


def _column_sums(products, starts, counts):
    """Sum ``products`` over the slices [starts[j], starts[j]+counts[j])."""
    out = np.zeros(len(counts))
    nonempty = counts > 0
    if products.size and nonempty.any():
        # reduceat sums each slice sequentially; empty columns are skipped
        # because their start offset would alias the next column's run.
        out[nonempty] = np.add.reduceat(products, starts[nonempty])
    return out


class SparseMatrix:
    """N x d design matrix stored by column.

    Parameters
    ----------
    n_rows, n_cols : int
        Matrix shape. Column indices run 0..n_cols-1.
    indptr : ndarray of shape (n_cols + 1,)
        Column j's entries live at positions indptr[j]:indptr[j+1].
    rows : ndarray of shape (nnz,)
        Row index of each stored entry, strictly ascending within a column.
    vals : ndarray of shape (nnz,)
        Stored values; finite and non-zero.
    bias_col : int or None
        Index of the always-one bias column, by convention the last one.
    """

    def __init__(self, n_rows, n_cols, indptr, rows, vals, bias_col=None,
                 check=True):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        self.bias_col = None if bias_col is None else int(bias_col)
        if check:
            self._validate()

    # -- construction ------------------------------------------------------

    @classmethod
    def from_columns(cls, n_rows, columns, bias_col=None):
        """Build from a list of per-column (row_indices, values) pairs."""
        indptr = np.zeros(len(columns) + 1, dtype=np.int64)
        row_parts, val_parts = [], []
        for j, (r, v) in enumerate(columns):
            r = np.asarray(r, dtype=np.int64)
            v = np.asarray(v, dtype=np.float64)
            if r.shape != v.shape:
                raise ValueError(f"column {j}: row/value length mismatch")
            order = np.argsort(r, kind="stable")
            row_parts.append(r[order])
            val_parts.append(v[order])
            indptr[j + 1] = indptr[j] + len(r)
        rows = np.concatenate(row_parts) if row_parts else np.zeros(0, np.int64)
        vals = np.concatenate(val_parts) if val_parts else np.zeros(0)
        return cls(n_rows, len(columns), indptr, rows, vals, bias_col=bias_col)

    @classmethod
    def from_dense(cls, arr, bias_col=None):
        """Build from a dense 2-D array, dropping exact zeros."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("from_dense expects a 2-D array")
        cols = []
        for j in range(arr.shape[1]):
            nz = np.nonzero(arr[:, j])[0]
            cols.append((nz, arr[nz, j]))
        return cls.from_columns(arr.shape[0], cols, bias_col=bias_col)

    def _validate(self):
        if self.indptr.shape != (self.n_cols + 1,):
            raise ValueError("indptr length must be n_cols + 1")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.rows):
            raise ValueError("indptr does not span the stored entries")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be non-decreasing")
        if len(self.rows) != len(self.vals):
            raise ValueError("rows/vals length mismatch")
        if len(self.rows):
            if self.rows.min() < 0 or self.rows.max() >= self.n_rows:
                raise ValueError("row index out of range")
            if not np.all(np.isfinite(self.vals)):
                raise ValueError("stored values must be finite")
            if np.any(self.vals == 0.0):
                raise ValueError("stored values must be non-zero")
            # ascending row order, no duplicates within a column
            d = np.diff(self.rows)
            boundary = self.indptr[1:-1] - 1
            boundary = boundary[(boundary >= 0) & (boundary < len(d))]
            interior = np.ones(len(d), dtype=bool)
            interior[boundary] = False
            if (interior & (d <= 0)).any():
                raise ValueError("row indices must be strictly ascending "
                                 "within each column")
        if self.bias_col is not None:
            if not 0 <= self.bias_col < self.n_cols:
                raise ValueError("bias column index out of range")
            r, v = self.col(self.bias_col)
            if len(r) != self.n_rows or not np.all(v == 1.0):
                raise ValueError("bias column must be 1.0 in every row")

    # -- basic views -------------------------------------------------------

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return len(self.vals)

    def col(self, j):
        """Return (row_indices, values) views of column j."""
        if not 0 <= j < self.n_cols:
            raise IndexError(f"column index {j} out of range")
        s, e = self.indptr[j], self.indptr[j + 1]
        return self.rows[s:e], self.vals[s:e]

    def col_nnz(self, j):
        return int(self.indptr[j + 1] - self.indptr[j])

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols))
        for j in range(self.n_cols):
            r, v = self.col(j)
            out[r, j] = v
        return out

    # -- kernels -----------------------------------------------------------

    def col_dot(self, j, v):
        """Inner product of column j with a length-n_rows vector."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_rows,):
            raise ValueError(f"vector length {v.shape} != ({self.n_rows},)")
        r, x = self.col(j)
        if len(r) == 0:
            return 0.0
        p = x * v[r]
        # same sequential reduction as correlations(); keeps both bit-equal
        return float(np.add.reduceat(p, np.array([0]))[0])

    def correlations(self, v):
        """All column inner products X^T v as a length-n_cols vector."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_rows,):
            raise ValueError(f"vector length {v.shape} != ({self.n_rows},)")
        counts = np.diff(self.indptr)
        if _n_threads == 1 or self.n_cols <= _CHUNK_COLS:
            products = self.vals * v[self.rows]
            return _column_sums(products, self.indptr[:-1], counts)
        bounds = list(range(0, self.n_cols, _CHUNK_COLS)) + [self.n_cols]

        def chunk(a, b):
            s, e = self.indptr[a], self.indptr[b]
            products = self.vals[s:e] * v[self.rows[s:e]]
            return _column_sums(products, self.indptr[a:b] - s, counts[a:b])

        with ThreadPoolExecutor(max_workers=_n_threads) as pool:
            parts = list(pool.map(lambda ab: chunk(*ab),
                                  zip(bounds[:-1], bounds[1:])))
        return np.concatenate(parts)

    def mat_vec(self, theta):
        """Dense product X @ theta, accumulated in ascending column order."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_cols,):
            raise ValueError(f"theta length {theta.shape} != ({self.n_cols},)")
        out = np.zeros(self.n_rows)
        active = np.nonzero(theta)[0]
        if len(active) == 0:
            return out
        if len(active) > 0.25 * self.n_cols:
            counts = np.diff(self.indptr)
            products = self.vals * np.repeat(theta, counts)
            # bincount accumulates in entry order = ascending column order
            return np.bincount(self.rows, weights=products,
                               minlength=self.n_rows).astype(np.float64)
        for j in active:
            r, v = self.col(j)
            out[r] += v * theta[j]
        return out

    def col_norms(self):
        """Euclidean norm of every column."""
        counts = np.diff(self.indptr)
        return np.sqrt(_column_sums(self.vals ** 2, self.indptr[:-1], counts))

    # -- structural ops ----------------------------------------------------

    def submatrix(self, indices):
        """Columns at the given indices, arranged ascending by original index."""
        idx = sorted(set(int(j) for j in indices))
        for j in idx:
            if not 0 <= j < self.n_cols:
                raise IndexError(f"column index {j} out of range")
        cols = [self.col(j) for j in idx]
        bias = self.bias_col
        new_bias = idx.index(bias) if bias is not None and bias in idx else None
        return SparseMatrix.from_columns(self.n_rows, cols, bias_col=new_bias)

    def densify_columns(self, indices):
        """Dense n_rows x len(indices) block of the given columns, in order."""
        out = np.zeros((self.n_rows, len(indices)))
        for k, j in enumerate(indices):
            r, v = self.col(int(j))
            out[r, k] = v
        return out

    # -- file format -------------------------------------------------------

    def save(self, path):
        """Write as text: header "n_rows n_cols", then "row col value" lines.

        Entries are emitted column-major so save/load round-trips exactly.
        """
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{self.n_rows} {self.n_cols}\n")
            for j in range(self.n_cols):
                r, v = self.col(j)
                for i, x in zip(r, v):
                    fh.write(f"{i} {j} {float(x)!r}\n")

    @classmethod
    def load(cls, path, bias_col="last"):
        """Read the text format written by save().

        bias_col: "last" designates the final column as the bias (validated),
        None loads a plain matrix, an int designates an explicit column.
        """
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}:1: expected header 'n_rows n_cols'")
            n_rows, n_cols = int(header[0]), int(header[1])
            per_col = [([], []) for _ in range(n_cols)]
            for lineno, line in enumerate(fh, start=2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'row col value'")
                i, j, x = int(parts[0]), int(parts[1]), float(parts[2])
                if not 0 <= i < n_rows or not 0 <= j < n_cols:
                    raise ValueError(f"{path}:{lineno}: index out of range")
                if x == 0.0 or not np.isfinite(x):
                    raise ValueError(f"{path}:{lineno}: value must be finite "
                                     "and non-zero")
                per_col[j][0].append(i)
                per_col[j][1].append(x)
        if bias_col == "last":
            bias_col = n_cols - 1 if n_cols else None
        return cls.from_columns(n_rows, per_col, bias_col=bias_col)
