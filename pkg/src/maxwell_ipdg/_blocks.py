"""Block-sparse assembly helpers."""
import numpy as np
import scipy.sparse as sp


def block_coo(blocks, row_cells, col_cells, row_size, col_size, shape):
    """Scatter dense cell blocks into a CSR matrix.

    ``blocks`` has shape (m, row_size, col_size); block b lands at rows
    ``row_cells[b] * row_size + [0, row_size)`` and the matching columns.
    Duplicates are summed in a fixed order, so the result is deterministic.
    """
    blocks = np.asarray(blocks)
    m = blocks.shape[0]
    r = (np.asarray(row_cells)[:, None] * row_size + np.arange(row_size)[None, :])
    c = (np.asarray(col_cells)[:, None] * col_size + np.arange(col_size)[None, :])
    rows = np.broadcast_to(r[:, :, None], (m, row_size, col_size)).ravel()
    cols = np.broadcast_to(c[:, None, :], (m, row_size, col_size)).ravel()
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def cross_matrix(n):
    """X with X @ u == u x n, for normals of shape (..., 3)."""
    n = np.asarray(n)
    X = np.zeros(n.shape[:-1] + (3, 3))
    X[..., 0, 1], X[..., 0, 2] = n[..., 2], -n[..., 1]
    X[..., 1, 0], X[..., 1, 2] = -n[..., 2], n[..., 0]
    X[..., 2, 0], X[..., 2, 1] = n[..., 1], -n[..., 0]
    return X


def kron3(A, B):
    """Batched Kronecker product of (..., 3, 3) with (..., p, q) -> (..., 3p, 3q)."""
    out = np.einsum("...ij,...pq->...ipjq", A, B)
    s = out.shape
    return out.reshape(s[:-4] + (s[-4] * s[-3], s[-2] * s[-1]))
