"""Finite-difference certification of the training gradients."""

import numpy as np

from dyntex import manifold as mf
from dyntex.avdl import AvdlParams, fixed_support_objective, grad_A, grad_D, support_matrix, transition_cost, transition_pairs
from dyntex.elastic_net import ElasticNetParams, batch_solve

EPS = 1e-6


def random_instance(seed, m=16, k=6, n=8, lambda1=0.1, lambda2=0.005, gamma=0.5):
    rng = np.random.default_rng(seed)
    D = mf.random_oblique(m, k, rng)
    X = rng.standard_normal((k, n + 1)) * (rng.uniform(size=(k, n + 1)) < 0.5)
    Y = D @ X + 0.05 * rng.standard_normal((m, n + 1))
    A = rng.standard_normal((k, k)) / np.sqrt(k)
    params = AvdlParams(ElasticNetParams(lambda1, lambda2), gamma=gamma)
    return rng, A, D, Y, params


def rel_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def check_instance(seed, n_directions=20):
    """Worst relative errors (grad_A, directional grad_D) on one instance."""
    rng, A, D, Y, params = random_instance(seed)
    codes = batch_solve(D, Y, params.elastic)
    X = support_matrix(D, Y, codes, params.elastic)
    pairs = transition_pairs(Y.shape[1])
    gA = grad_A(A, X[:, pairs[0]], X[:, pairs[1]], params.gamma)
    fd = np.zeros_like(A)
    for i in range(A.size):
        E = np.zeros_like(A)
        E.flat[i] = EPS
        fd.flat[i] = (transition_cost(A + E, X, params.gamma, pairs) - transition_cost(A - E, X, params.gamma, pairs)) / (2 * EPS)
    err_A = rel_error(gA, fd)

    gD = grad_D(A, D, Y, codes, params.elastic)
    tangency = float(np.abs(np.diag(gD.T @ D)).max())
    err_D = 0.0
    for _ in range(n_directions):
        H = mf.random_tangent(D, rng)
        H /= np.linalg.norm(H)
        phi = lambda t: fixed_support_objective(A, mf.retract(D, H, t), Y, codes, params)
        fd_dir = (phi(EPS) - phi(-EPS)) / (2 * EPS)
        err_D = max(err_D, rel_error(mf.inner(gD, H), fd_dir))
    return err_A, err_D, tangency
