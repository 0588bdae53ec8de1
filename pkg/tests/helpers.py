"""Shared builders for the unit tests."""

import numpy as np

from sspc.effham import EffectiveEvaluator
from sspc.partition import ModelSpace

TOY = np.array([[0.0, 1.0], [1.0, 1.0]])
LAM_MINUS = (1 - np.sqrt(5)) / 2
LAM_PLUS = (1 + np.sqrt(5)) / 2


def toy_ev(**kw):
    return EffectiveEvaluator.from_hamiltonian(TOY, ModelSpace.from_indices(2, [0]), **kw)


def random_hermitian(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    return scale * h / np.linalg.norm(h, 2)


def random_space(n, d, rng):
    return ModelSpace.from_columns(rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))


def random_ev(n, d, seed, **kw):
    rng = np.random.default_rng(seed)
    h = random_hermitian(n, rng)
    ms = random_space(n, d, rng)
    return h, ms, EffectiveEvaluator.from_hamiltonian(h, ms, **kw)


def decoupled(h11, h22):
    """Block-diagonal H with P the leading coordinates, so ``H12 = 0``."""
    h11, h22 = np.atleast_2d(h11), np.atleast_2d(h22)
    d, q = h11.shape[0], h22.shape[0]
    h = np.zeros((d + q, d + q), dtype=complex)
    h[:d, :d] = h11
    h[d:, d:] = h22
    return h, ModelSpace.from_indices(d + q, range(d))
