import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphsmile import autograd as ag
from graphsmile.autograd import Param
from graphsmile.errors import ShapeError
from graphsmile.graph import assemble_adjacency, build_bimodal_graph
from graphsmile.gsf import (
    GsfStack,
    ProjectionSet,
    gsf_forward,
    integrate_modalities,
    project_inputs,
    sgc_layer,
    split_pair_output,
)


def identity_fc(stack: GsfStack):
    """Make every FC^(l) the identity map (slope 1, identity weights, zero bias)."""
    D = stack.thetas[0].rows
    for W, b in zip(stack.fc_weights, stack.fc_biases):
        W.assign(np.eye(D))
        b.assign(np.zeros((1, D)))
    stack.slope = 1.0
    stack.dropout = 0.0
    return stack


def random_graph(rng, M, P):
    g = build_bimodal_graph(M, P, P)
    g.weights.assign(rng.uniform(0.2, 1.0, g.weights.value.shape))
    return g


def test_projection():
    rng = np.random.default_rng(0)
    proj = ProjectionSet.init((3, 2, 4), 3, rng)
    proj.biases["v"].assign([[1.0, 2.0, 3.0]])
    feats = {"t": rng.standard_normal((5, 3)), "v": np.zeros((5, 2)), "a": rng.standard_normal((5, 4))}
    X = project_inputs(feats, proj)
    np.testing.assert_array_equal(X["v"].value, np.tile([[1.0, 2.0, 3.0]], (5, 1)))
    proj.weights["t"].assign(np.eye(3))
    np.testing.assert_array_equal(project_inputs(feats, proj)["t"].value, feats["t"])
    with pytest.raises(ShapeError):
        project_inputs({**feats, "a": np.zeros((5, 3))}, proj)


def test_projection_gradient():
    rng = np.random.default_rng(1)
    proj = ProjectionSet.init((3, 2, 2), 4, rng)
    feats = {m: rng.standard_normal((3, d)) for m, d in zip("tva", (3, 2, 2))}
    w = ag.const(rng.standard_normal((3, 4)))
    rep = ag.grad_check(lambda: ag.sum_all(ag.mul(project_inputs(feats, proj)["t"], w)), proj.params)
    assert rep.passed, str(rep)


def test_sgc_layer_swap():
    A = assemble_adjacency(build_bimodal_graph(1, 0, 0))
    X = ag.const([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(sgc_layer(A, X, ag.const(np.eye(2))).value, [[3.0, 4.0], [1.0, 2.0]])
    np.testing.assert_array_equal(sgc_layer(A, ag.const(np.zeros((2, 2))), ag.const(np.eye(2))).value, 0.0)


def test_sgc_layer_loop_oracle():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((6, 6))
    X = rng.standard_normal((6, 4))
    T = rng.standard_normal((4, 4))
    want = np.zeros((6, 4))
    for i in range(6):
        for j in range(4):
            for k in range(6):
                for m in range(4):
                    want[i, j] += A[i, k] * X[k, m] * T[m, j]
    got = sgc_layer(ag.const(A), ag.const(X), ag.const(T)).value
    np.testing.assert_allclose(got, want, atol=1e-12)
    with pytest.raises(ShapeError):
        sgc_layer(ag.const(A), ag.const(X[:5]), ag.const(T))


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10_000))
def test_sgc_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    A, X, Y, T = (ag.const(rng.standard_normal(s)) for s in ((6, 6), (6, 3), (6, 3), (3, 3)))
    lhs = sgc_layer(A, ag.const(a * X.value + b * Y.value), T).value
    rhs = a * sgc_layer(A, X, T).value + b * sgc_layer(A, Y, T).value
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_zero_layer_passes_input():
    rng = np.random.default_rng(3)
    stack = GsfStack.init("tv", 1, 3, rng)
    stack.thetas[0].assign(np.zeros((3, 3)))
    A = assemble_adjacency(build_bimodal_graph(2, 1, 1))
    X0 = ag.const(rng.standard_normal((4, 3)))
    np.testing.assert_array_equal(gsf_forward(A, X0, stack).value, X0.value)


def test_residual_modes():
    rng = np.random.default_rng(4)
    L, D, M = 3, 4, 3
    stack = GsfStack.init("tv", L, D, rng, slope=0.1)
    A = assemble_adjacency(random_graph(rng, M, 1))
    X0 = ag.const(rng.standard_normal((2 * M, D)))
    layers = []
    full = gsf_forward(A, X0, stack, mode="full", layers_out=layers).value
    Xs = [x.value for x in layers]

    def fc(x, l):
        z = x @ stack.fc_weights[l].value + stack.fc_biases[l].value
        return np.where(z > 0, z, 0.1 * z)

    np.testing.assert_allclose(full, X0.value + sum(fc(Xs[l], l) for l in range(L)), atol=1e-12)
    np.testing.assert_allclose(gsf_forward(A, X0, stack, mode="no_fc_res").value, X0.value + sum(Xs), atol=1e-12)
    np.testing.assert_allclose(gsf_forward(A, X0, stack, mode="no_res").value, fc(Xs[-1], L - 1), atol=1e-12)
    with pytest.raises(ValueError):
        gsf_forward(A, X0, stack, mode="bogus")


@pytest.mark.parametrize("L", [1, 2, 3, 4, 5])
def test_unrolled_powers(L):
    rng = np.random.default_rng(10 + L)
    M, D = 4, 3
    stack = identity_fc(GsfStack.init("ta", L, D, rng))
    A = assemble_adjacency(random_graph(rng, M, 1))
    X0 = rng.standard_normal((2 * M, D))
    layers = []
    gsf_forward(A, ag.const(X0), stack, layers_out=layers)
    prod = np.eye(D)
    for l in range(1, L + 1):
        prod = prod @ stack.thetas[l - 1].value
        want = np.linalg.matrix_power(A.value, l) @ X0 @ prod
        np.testing.assert_allclose(layers[l - 1].value, want, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("M,L", [(2, 3), (4, 5), (6, 4)])
def test_alternation_by_zeroing(M, L):
    rng = np.random.default_rng(M * 10 + L)
    D = 3
    stack = identity_fc(GsfStack.init("tv", L, D, rng))
    A = assemble_adjacency(random_graph(rng, M, 1))
    X0 = rng.standard_normal((2 * M, D))
    X0[M:] = 0.0  # modality-2 input silenced
    layers = []
    gsf_forward(A, ag.const(X0), stack, layers_out=layers)
    for l, X in enumerate(layers, start=1):
        top, bottom = X.value[:M], X.value[M:]
        if l % 2:  # odd hops carry the other modality only
            assert np.all(top == 0)
            assert np.any(bottom != 0)
        else:
            assert np.all(bottom == 0)
            assert np.any(top != 0)


def test_receptive_field():
    rng = np.random.default_rng(5)
    M, D, P = 7, 2, 1
    for L in (1, 2, 3):
        stack = GsfStack.init("tv", L, D, rng, slope=0.2)
        A = assemble_adjacency(random_graph(rng, M, P))
        X0 = rng.standard_normal((2 * M, D))
        base = gsf_forward(A, ag.const(X0), stack).value
        for j in range(M):
            bumped = X0.copy()
            bumped[j] += 1.0
            diff = np.abs(gsf_forward(A, ag.const(bumped), stack).value - base).sum(axis=1)
            for node in range(2 * M):
                i = node % M
                if node != j and abs(i - j) > L * P:
                    assert diff[node] == 0.0


def test_split_pair_output():
    X = ag.const(np.arange(12.0).reshape(6, 2))
    a, b = split_pair_output(X)
    np.testing.assert_array_equal(a.value, X.value[:3])
    np.testing.assert_array_equal(b.value, X.value[3:])
    np.testing.assert_array_equal(ag.concat_rows([a, b]).value, X.value)
    one, two = split_pair_output(ag.const([[1.0], [2.0]]))
    assert one.value.tolist() == [[1.0]] and two.value.tolist() == [[2.0]]
    with pytest.raises(ShapeError):
        split_pair_output(ag.const(np.ones((3, 2))))


def test_integrate_modalities():
    rng = np.random.default_rng(6)
    names = ["t<-v", "v<-t", "t<-a", "a<-t", "v<-a", "a<-v"]
    comps = {n: ag.const(rng.standard_normal((3, 4))) for n in names}
    theta = rng.standard_normal((4, 5))
    H = integrate_modalities(comps, ag.const(theta), 0.01).H.value
    want = np.zeros((3, 5))
    for n in names:
        X = comps[n].value
        for i in range(3):
            for k in range(5):
                z = sum(X[i, j] * theta[j, k] for j in range(4))
                want[i, k] += z if z > 0 else 0.01 * z
    np.testing.assert_allclose(H, want, atol=1e-12)
    for perm in itertools.islice(itertools.permutations(names), 0, 720, 97):
        Hp = integrate_modalities({n: comps[n] for n in perm}, ag.const(theta)).H.value
        np.testing.assert_allclose(Hp, H, atol=1e-12)
    zeros = {n: ag.const(np.zeros((3, 4))) for n in names}
    np.testing.assert_array_equal(integrate_modalities(zeros, ag.const(theta)).H.value, 0.0)


def test_integrate_shape_errors():
    with pytest.raises(ShapeError):
        integrate_modalities({}, ag.const(np.eye(2)))
    with pytest.raises(ShapeError):
        integrate_modalities({"a": ag.const(np.ones((2, 2))), "b": ag.const(np.ones((3, 2)))}, ag.const(np.eye(2)))


def test_gsf_gradients():
    rng = np.random.default_rng(7)
    stack = GsfStack.init("va", 2, 3, rng, slope=0.1)
    g = random_graph(rng, 3, 1)
    X0 = Param(rng.standard_normal((6, 3)), "x0")
    w = ag.const(rng.standard_normal((6, 3)))

    def closure():
        return ag.sum_all(ag.mul(gsf_forward(assemble_adjacency(g, normalize=True), X0, stack), w))

    rep = ag.grad_check(closure, [*stack.params, g.weights, X0])
    assert rep.passed, str(rep)
