"""Symmetric-tensor storage helpers (jax and numpy).

Symmetric tensors are stored with ``nd(nd+1)/2`` components: 2D
``(xx, yy, xy)`` and 3D ``(xx, yy, zz, xy, yz, xz)``. Off-diagonal entries
are tensor components, not engineering strains.
"""
import jax.numpy as jnp
import numpy as np

VOIGT_PAIRS = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)),
}


def _index(nd):
    idx = np.zeros((nd, nd), dtype=np.int64)
    for k, (i, j) in enumerate(VOIGT_PAIRS[nd]):
        idx[i, j] = idx[j, i] = k
    return idx


_IDX = {2: _index(2), 3: _index(3)}


def sym_from_voigt(v, nd, xp=jnp):
    """Full ``(..., nd, nd)`` tensor from stored components ``(..., nsym)``."""
    return v[..., _IDX[nd]] if xp is np else jnp.take(v, _IDX[nd], axis=-1)


def voigt_from_sym(M, nd):
    """Stored components of a symmetric tensor."""
    return np.stack([M[..., i, j] for i, j in VOIGT_PAIRS[nd]], axis=-1)


def voigt_row(M, nd, xp=jnp):
    """Contract ``M`` with the symmetric basis tensors used as test functions:
    ``M_ii`` on the diagonal and ``M_ij + M_ji`` off it."""
    out = [M[..., i, i] if i == j else M[..., i, j] + M[..., j, i] for i, j in VOIGT_PAIRS[nd]]
    return xp.stack(out, axis=-1)


def sym(A):
    return 0.5 * (A + jnp.swapaxes(A, -1, -2))


def dev(A, nd):
    tr = jnp.trace(A, axis1=-2, axis2=-1)
    return A - (tr / nd)[..., None, None] * jnp.eye(nd)
