import numpy as np
import pytest

from aopinn import diffkit as dk
from aopinn.errors import NumericFailure

from .oracles import central_difference


def test_square_derivative():
    assert dk.forward_with_time_derivative(lambda t: t * t, 3.0) == (9.0, 6.0)


def test_tanh_at_zero():
    assert dk.forward_with_time_derivative(dk.tanh, 0.0) == (0.0, 1.0)


def test_numpy_ufuncs_dispatch():
    v, d = dk.forward_with_time_derivative(lambda t: np.tanh(2.0 * t) / (1.0 + t), 0.5)
    h = 1e-6
    f = lambda t: np.tanh(2.0 * t) / (1.0 + t)
    assert v == pytest.approx(f(0.5))
    assert d == pytest.approx((f(0.5 + h) - f(0.5 - h)) / (2 * h), rel=1e-8)


def test_unsupported_primitive():
    with pytest.raises(dk.UnsupportedPrimitive):
        dk.forward_with_time_derivative(np.sin, 1.0)
    with pytest.raises(dk.UnsupportedPrimitive):
        dk.forward_with_time_derivative(lambda t: t**3, 1.0)


def _two_layer(rng):
    w1, b1 = rng.normal(size=(1, 6)), rng.normal(size=6)
    w2, b2 = rng.normal(size=(6, 3)), rng.normal(size=3)

    def net(t):
        x = t * np.ones((1, 1)) if not isinstance(t, dk.Dual) else dk.Dual(
            np.reshape(t.value, (1, 1)), np.reshape(t.deriv, (1, 1))
        )
        return dk.affine(dk.tanh(dk.affine(x, w1, b1)), w2, b2)

    return net


def test_network_time_derivative_vs_finite_difference():
    rng = np.random.default_rng(0)
    net = _two_layer(rng)
    h = 1e-5
    for t in rng.uniform(-2, 2, size=5):
        v, d = dk.forward_with_time_derivative(net, t)
        fd = (net(t + h) - net(t - h)) / (2 * h)
        np.testing.assert_allclose(d, fd, rtol=1e-6, atol=1e-10)


def test_gradient_quadratic():
    w = np.array([1.0, -2.0, 0.5])
    g = dk.gradient(lambda tape, x: tape.sum(x * x), w)
    np.testing.assert_array_equal(g, 2 * w)


def test_dead_parameter_exact_zero():
    a, b = np.array([1.0, 2.0]), np.array([3.0])
    ga, gb = dk.gradient(lambda tape, x, y: tape.sum(dk.square(x)), [a, b])
    assert np.all(gb == 0.0)
    np.testing.assert_array_equal(ga, 2 * a)


def _tiny_net_params(rng, sizes=(1, 4, 4, 1)):
    out = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        out += [rng.normal(size=(a, b)), rng.normal(size=b)]
    return out


def _net_on_tape(tape, pv, t):
    x = tape.dual_input(np.reshape(t, (-1, 1)), np.ones((np.size(t), 1)))
    n = len(pv) // 2
    h = x
    for k in range(n):
        h = dk.affine(h, pv[2 * k], pv[2 * k + 1])
        if k < n - 1:
            h = dk.tanh(h)
    return h


def test_gradient_through_time_derivative():
    rng = np.random.default_rng(1)
    params = _tiny_net_params(rng)
    shapes = [p.shape for p in params]
    t0 = np.array([0.3])

    def loss(tape, *pv):
        out = _net_on_tape(tape, pv, t0)
        return tape.sum(dk.square(tape.time_derivative(out)))

    grads = dk.gradient(loss, params)

    def f(flat):
        return dk.value_and_gradient(loss, dk.unflatten(flat, shapes))[0]

    fd = central_difference(f, dk.flatten(params))
    np.testing.assert_allclose(dk.flatten(grads), fd, rtol=1e-5, atol=1e-8)


def test_all_primitives_gradient():
    """Mixed expression over every primitive, differentiated in both halves."""
    rng = np.random.default_rng(2)
    params = _tiny_net_params(rng, (1, 3, 2)) + [np.array(0.7)]
    shapes = [p.shape for p in params]
    t = np.linspace(-1, 1, 7)

    def loss(tape, *pv):
        out = _net_on_tape(tape, pv[:-1], t)
        a, b = tape.column(out, 0), tape.column(out, 1)
        c = pv[-1]
        expr = (a * b - c / (2.0 + dk.square(b))) / (1.5 + dk.tanh(a)) + 3.0 - a
        resid = tape.time_derivative(expr) - c * expr
        return tape.mean(dk.square(resid)) + tape.mean(expr * expr)

    grads = dk.gradient(loss, params)
    fd = central_difference(lambda x: dk.value_and_gradient(loss, dk.unflatten(x, shapes))[0], dk.flatten(params))
    np.testing.assert_allclose(dk.flatten(grads), fd, rtol=1e-5, atol=1e-8)


def test_tape_matches_dual_forward():
    rng = np.random.default_rng(3)
    params = _tiny_net_params(rng)
    t = np.linspace(0, 1, 5)
    tape = dk.Tape()
    pv = [tape.variable(p) for p in params]
    out = _net_on_tape(tape, pv, t)
    x = dk.Dual(t[:, None], np.ones((5, 1)))
    h = x
    for k in range(3):
        h = dk.affine(h, params[2 * k], params[2 * k + 1])
        if k < 2:
            h = dk.tanh(h)
    np.testing.assert_array_equal(out.value, h.value)
    np.testing.assert_array_equal(out.deriv, h.deriv)


def test_linearity_and_determinism():
    rng = np.random.default_rng(4)
    params = _tiny_net_params(rng)
    t = np.linspace(0, 1, 6)

    def l1(tape, *pv):
        return tape.mean(dk.square(_net_on_tape(tape, pv, t)))

    def l2(tape, *pv):
        return tape.mean(dk.square(tape.time_derivative(_net_on_tape(tape, pv, t))))

    def combo(tape, *pv):
        return 2.5 * l1(tape, *pv) - 0.5 * l2(tape, *pv)

    g1 = dk.flatten(dk.gradient(l1, params))
    g2 = dk.flatten(dk.gradient(l2, params))
    gc = dk.flatten(dk.gradient(combo, params))
    np.testing.assert_allclose(gc, 2.5 * g1 - 0.5 * g2, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(gc, dk.flatten(dk.gradient(combo, params)))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_forward_raises():
    with pytest.raises(NumericFailure):
        dk.gradient(lambda tape, x: tape.sum(x / 0.0), np.array([1.0]))


def test_nested_time_derivative_rejected():
    def loss(tape, x):
        inp = tape.dual_input(np.array([1.0]), np.array([1.0]))
        d = tape.time_derivative(inp * x)
        return tape.sum(tape.time_derivative(d))

    with pytest.raises(dk.UnsupportedPrimitive):
        dk.gradient(loss, np.array([2.0]))


def test_flatten_roundtrip():
    arrs = [np.ones((2, 3)), np.arange(4.0), np.array(5.0)]
    flat = dk.flatten(arrs)
    back = dk.unflatten(flat, [a.shape for a in arrs])
    for a, b in zip(arrs, back):
        np.testing.assert_array_equal(a, b)
