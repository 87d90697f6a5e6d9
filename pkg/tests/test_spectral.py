import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltflow.spectral import (GridMismatchError, ParityError, SymTensorU2,
                               _operator, apply_L, eigensolve, hessian_f,
                               inner_f, project, ricci_tensor)

NN, SM = 900, 14.0


@pytest.fixture(scope="module")
def op(bg):
    return _operator(bg, NN, SM)


def rand_tensor(op, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((4, op.n))
    # wash out gross parity violations near the axis
    v[3] *= np.tanh(op.s / 2.0)
    gap = (v[0] - v[2]) * np.exp(-op.s**2)
    v[0] -= 0.5 * gap
    v[2] += 0.5 * gap
    return SymTensorU2.from_stack(op.s, v)


def diff_norm(op, A, B, lam=1.0):
    d = SymTensorU2(s=A.s, h00=A.h00 - lam * B.h00, h11=A.h11 - lam * B.h11,
                    h33=A.h33 - lam * B.h33, h03=A.h03 - lam * B.h03)
    return op.norm(d)


def test_metric_tensor_maps_to_twice_ricci(bg, op):
    one = np.ones(op.n)
    g = SymTensorU2(s=op.s, h00=one, h11=one.copy(), h33=one.copy(),
                    h03=np.zeros(op.n))
    Lg = op.apply(g)
    ric = ricci_tensor(bg, NN, SM)
    # away from the Dirichlet edge the weighted norm sees the identity
    assert diff_norm(op, Lg, ric, lam=2.0) / op.norm(ric) < 2e-4


def test_eigen_identities(bg, op):
    ric = ricci_tensor(bg, NN, SM)
    hes = hessian_f(bg, NN, SM)
    assert diff_norm(op, op.apply(ric), ric, 1.0) / op.norm(ric) < 1e-4
    assert diff_norm(op, op.apply(hes), hes, 0.0) / op.norm(hes) < 1e-4


def test_self_adjointness(bg, op):
    S = rand_tensor(op, 1)
    T = rand_tensor(op, 2)
    lhs = op.inner(op.apply(S), T)
    rhs = op.inner(S, op.apply(T))
    assert abs(lhs - rhs) <= 1e-8 * op.norm(S) * op.norm(T)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_inner_product_axioms(bg, seed):
    op = _operator(bg, NN, SM)
    S = rand_tensor(op, seed)
    T = rand_tensor(op, seed + 77)
    assert op.inner(S, T) == pytest.approx(op.inner(T, S), rel=1e-12, abs=1e-12)
    nrm = op.inner(S, S)
    assert nrm >= 0.0
    zero = SymTensorU2.from_stack(op.s, np.zeros((4, op.n)))
    assert op.inner(zero, zero) == 0.0


def test_u2_closure_of_curvature_action(bg, op):
    # the curvature action maps U(2) components into U(2) components: the
    # (1,2), (0,1), (1,3) output slots vanish identically
    from boltflow.spectral import _pack
    for comp in range(4):
        e = np.zeros((4, op.n))
        e[comp] = 1.0
        out = np.einsum("niklj,nkl->nij", op._Riem, _pack(e))
        for (i, j) in ((1, 2), (0, 1), (0, 2), (1, 3), (2, 3)):
            assert np.max(np.abs(out[:, i, j])) < 1e-12
        assert np.max(np.abs(out[:, 1, 1] - out[:, 2, 2])) < 1e-12


def test_spectrum_structure(bg, spectrum):
    vals = spectrum.eigenvalues
    assert np.all(np.diff(vals) <= 1e-12)
    assert spectrum.K >= 2
    assert abs(vals[0] - 1.0) < 5e-4
    assert abs(vals[1]) < 5e-4
    assert vals[spectrum.K] < spectrum.lambda_star < vals[spectrum.K - 1]
    assert spectrum.lambda_star < 0
    # strict decrease across distinct levels after multiplicity grouping
    layers = []
    for v in vals:
        if not layers or abs(v - layers[-1]) > 1e-6:
            layers.append(v)
    assert all(layers[i] > layers[i + 1] for i in range(len(layers) - 1))
    assert np.max(spectrum.residuals) < 1e-7


def test_eigentensors_match_geometric_pairs(bg, spectrum, op=None):
    op = _operator(bg, NN, SM)
    ric = ricci_tensor(bg, NN, SM)
    hes = hessian_f(bg, NN, SM)
    h1, h2 = spectrum.eigentensors[0], spectrum.eigentensors[1]
    overlap_ric = abs(op.inner(h1, ric)) / (op.norm(h1) * op.norm(ric))
    overlap_hes = abs(op.inner(h2, hes)) / (op.norm(h2) * op.norm(hes))
    assert overlap_ric > 0.9999
    assert overlap_hes > 0.9999


def test_gram_identity(bg, spectrum):
    op = _operator(bg, NN, SM)
    n = len(spectrum.eigentensors)
    G = np.array([[op.inner(a, b) for b in spectrum.eigentensors]
                  for a in spectrum.eigentensors])
    assert np.max(np.abs(G - np.eye(n))) < 1e-8


def test_projection_behaviour(bg, spectrum):
    op = _operator(bg, NN, SM)
    h1 = spectrum.eigentensors[0]
    coeffs, hu, hs, rem = op.project(h1, spectrum)
    assert abs(coeffs[0] - 1.0) < 1e-10
    assert np.max(np.abs(coeffs[1:])) < 1e-8
    assert op.norm(hs) < 1e-8
    # Ric concentrates on the eigenvalue-1 pair
    ric = ricci_tensor(bg, NN, SM)
    coeffs, hu, hs, rem = op.project(ric, spectrum)
    total = np.sqrt(np.sum(coeffs**2) + rem**2)
    assert abs(coeffs[0]) / total > 0.999
    # something orthogonal to the computed span projects to almost nothing
    x = rand_tensor(op, 9)
    stack = x.stack()
    for hj in spectrum.eigentensors:
        stack -= op.inner(x, hj) * hj.stack()
    x_perp = SymTensorU2.from_stack(op.s, stack)
    coeffs, hu, hs, rem = op.project(x_perp, spectrum)
    assert np.max(np.abs(coeffs)) < 1e-8 * op.norm(x_perp)
    assert rem == pytest.approx(op.norm(x_perp), rel=1e-10)


def test_parity_and_grid_guards(bg):
    op = _operator(bg, NN, SM)
    bad = SymTensorU2(s=op.s, h00=np.zeros(op.n), h11=np.zeros(op.n),
                      h33=np.zeros(op.n), h03=np.ones(op.n))
    with pytest.raises(ParityError):
        op.apply(bad)
    other = SymTensorU2(s=op.s + 0.1, h00=np.zeros(op.n), h11=np.zeros(op.n),
                        h33=np.zeros(op.n), h03=np.zeros(op.n))
    with pytest.raises(GridMismatchError):
        op.apply(other)


def test_eigenvalues_stable_under_refinement(bg, spectrum):
    res2 = eigensolve(bg, count=4, n_nodes=2 * NN, s_max=SM)
    for a, b in zip(spectrum.eigenvalues[:4], res2.eigenvalues):
        denom = max(abs(a), 0.05)
        assert abs(a - b) / denom < 0.01
