import numpy as np
import pytest

from graphmrc import Tensor, grad_check
from graphmrc import autodiff as ad


def t64(data, grad=True):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=grad, dtype=np.float64)


def rand64(rng, *shape, grad=True):
    return Tensor(rng.standard_normal(shape), requires_grad=grad, dtype=np.float64)


class TestForwardSemantics:
    def test_softmax_symmetry(self):
        out = ad.softmax_lastdim(t64([[0.0, 0.0]]))
        assert np.allclose(out.data, [[0.5, 0.5]])

    def test_softmax_rows_sum_to_one(self, rng):
        x = rand64(rng, 7, 11)
        out = ad.softmax_lastdim(x)
        assert np.abs(out.data.sum(axis=-1) - 1.0).max() < 1e-12
        assert (out.data >= 0).all()

    def test_softmax_shift_invariance(self, rng):
        x = rng.standard_normal((5, 9))
        a = ad.softmax_lastdim(t64(x)).data
        b = ad.softmax_lastdim(t64(x + 17.3)).data
        assert np.abs(a - b).max() < 1e-12

    def test_layer_norm_constant_row_is_zero(self):
        out = ad.layer_norm_lastdim(t64([[4.0, 4.0, 4.0, 4.0]]))
        assert np.abs(out.data).max() < 1e-2  # eps keeps it finite, near zero
        assert np.isfinite(out.data).all()

    def test_layer_norm_moments(self, rng):
        # output variance is var/(var+eps); the 1e-6 bound needs var >> eps=1e-5
        x = Tensor(rng.standard_normal((6, 32)) * 20.0, dtype=np.float64)
        out = ad.layer_norm_lastdim(x).data
        assert np.abs(out.mean(axis=-1)).max() < 1e-9
        assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-6

    def test_matmul_shape_rule(self, rng):
        out = ad.matmul(rand64(rng, 2, 3), rand64(rng, 3, 4))
        assert out.shape == (2, 4)

    def test_matmul_shape_mismatch_names_shapes(self, rng):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
            ad.matmul(rand64(rng, 2, 3), rand64(rng, 4, 2))

    def test_fused_attention_matches_composition(self, rng):
        q, k, v = (rand64(rng, 5, 8) for _ in range(3))
        bias = rng.standard_normal((5, 5))
        fused, weights = ad.scaled_dot_attention(q, k, v, bias)
        logits = q.data @ k.data.T / np.sqrt(8) + bias
        ref = ad.softmax_lastdim(t64(logits, grad=False)).data
        assert np.abs(weights - ref).max() < 1e-12
        assert np.abs(fused.data - ref @ v.data).max() < 1e-12

    def test_layer_norm_affine_matches_composition(self, rng):
        x = rand64(rng, 4, 16)
        gain = rand64(rng, 1, 16)
        bias = rand64(rng, 1, 16)
        fused = ad.layer_norm_affine_lastdim(x, gain, bias)
        ref = ad.layer_norm_lastdim(x).data * gain.data + bias.data
        assert np.abs(fused.data - ref).max() < 1e-14

    def test_embedding_lookup_gathers_rows(self, rng):
        table = rand64(rng, 10, 4)
        out = ad.embedding_lookup(table, np.array([3, 3, 0]))
        assert np.array_equal(out.data, table.data[[3, 3, 0]])
        with pytest.raises(ValueError, match="out of range"):
            ad.embedding_lookup(table, np.array([10]))

    def test_interval_means(self, rng):
        x = rand64(rng, 6, 3)
        out = ad.interval_means(x, [(0, 2), (2, 3), (3, 6)])
        assert np.allclose(out.data[0], x.data[0:2].mean(axis=0))
        assert np.allclose(out.data[1], x.data[2])
        with pytest.raises(ValueError):
            ad.interval_means(x, [(2, 2)])


class TestBackward:
    def test_square_gradient(self):
        x = t64([[3.0]])
        y = ad.mul(x, x)
        y.backward()
        assert x.grad[0, 0] == pytest.approx(6.0)

    def test_softmax_sum_has_zero_gradient(self, rng):
        v = rand64(rng, 1, 6)
        ad.sum_all(ad.softmax_lastdim(v)).backward()
        assert np.abs(v.grad).max() < 1e-12

    def test_grad_accumulates_across_calls(self):
        x = t64([[2.0]])
        ad.mul(x, x).backward()
        ad.mul(x, x).backward()
        assert x.grad[0, 0] == pytest.approx(8.0)
        x.zero_grad()
        ad.mul(x, x).backward()
        assert x.grad[0, 0] == pytest.approx(4.0)

    def test_non_scalar_loss_rejected(self, rng):
        with pytest.raises(ValueError, match="scalar"):
            rand64(rng, 2, 2).backward()

    def test_shared_subexpression(self):
        x = t64([[2.0]])
        y = ad.add(ad.mul(x, x), x)  # x^2 + x
        y.backward()
        assert x.grad[0, 0] == pytest.approx(5.0)

    def test_intermediates_receive_grads(self):
        x = t64([[2.0]])
        mid = ad.mul(x, x)
        ad.mul(mid, x).backward()
        assert mid.grad is not None
        assert mid.grad[0, 0] == pytest.approx(2.0)


PRIMITIVE_CASES = [
    ("matmul", lambda rng: ((rng, 3, 4), (rng, 4, 5)), lambda a, b: ad.matmul(a, b)),
    ("add_broadcast", lambda rng: ((rng, 3, 4), (rng, 1, 4)), lambda a, b: ad.add(a, b)),
    ("mul_broadcast", lambda rng: ((rng, 3, 4), (rng, 3, 1)), lambda a, b: ad.mul(a, b)),
    ("transpose", lambda rng: ((rng, 3, 5),), lambda a: ad.transpose(a)),
    ("scale", lambda rng: ((rng, 2, 3),), lambda a: ad.scale(a, -2.5)),
    ("concat_lastdim", lambda rng: ((rng, 2, 3), (rng, 2, 4)), lambda a, b: ad.concat_lastdim([a, b])),
    ("concat_rows", lambda rng: ((rng, 2, 3), (rng, 4, 3)), lambda a, b: ad.concat_rows([a, b])),
    ("slice_rows", lambda rng: ((rng, 5, 3),), lambda a: ad.slice_rows(a, 1, 4)),
    ("mean_rows", lambda rng: ((rng, 5, 3),), lambda a: ad.mean_rows(a)),
    ("softmax", lambda rng: ((rng, 3, 6),), lambda a: ad.softmax_lastdim(a)),
    ("log_softmax", lambda rng: ((rng, 2, 5),), lambda a: ad.log_softmax_lastdim(a)),
    ("layer_norm", lambda rng: ((rng, 4, 8),), lambda a: ad.layer_norm_lastdim(a)),
    (
        "layer_norm_affine",
        lambda rng: ((rng, 4, 8), (rng, 1, 8), (rng, 1, 8)),
        lambda a, g, b: ad.layer_norm_affine_lastdim(a, g, b),
    ),
    ("sigmoid", lambda rng: ((rng, 3, 4),), lambda a: ad.sigmoid(a)),
    ("relu", lambda rng: ((rng, 3, 4),), lambda a: ad.relu(a)),
    ("gelu", lambda rng: ((rng, 3, 4),), lambda a: ad.gelu(a)),
    ("log", lambda rng: ((rng, 2, 3),), lambda a: ad.log(ad.sigmoid(a))),
    ("affine", lambda rng: ((rng, 3, 4), (rng, 4, 2), (rng, 1, 2)), lambda x, w, b: ad.affine(x, w, b)),
    (
        "attention",
        lambda rng: ((rng, 4, 6), (rng, 4, 6), (rng, 4, 6)),
        lambda q, k, v: ad.scaled_dot_attention(q, k, v, np.eye(4))[0],
    ),
    (
        "interval_means",
        lambda rng: ((rng, 6, 3),),
        lambda a: ad.interval_means(a, [(0, 2), (2, 6)]),
    ),
]


@pytest.mark.parametrize("name,make,op", PRIMITIVE_CASES, ids=[c[0] for c in PRIMITIVE_CASES])
def test_primitive_gradients_match_finite_differences(name, make, op, rng):
    tensors = [rand64(rng, *dims[1:]) for dims in make(rng)]
    weights = rng.standard_normal(op(*tensors).shape)  # random projection to a scalar

    def f():
        return ad.sum_all(ad.mul(op(*tensors), Tensor(weights, dtype=np.float64)))

    assert grad_check(f, tensors, step=1e-5) < 1e-6


def test_two_layer_network_matches_finite_differences(rng):
    x = Tensor(rng.standard_normal((4, 6)), dtype=np.float64)
    w1, b1 = rand64(rng, 6, 8), rand64(rng, 1, 8)
    w2, b2 = rand64(rng, 8, 2), rand64(rng, 1, 2)

    def f():
        hidden = ad.gelu(ad.affine(x, w1, b1))
        out = ad.affine(hidden, w2, b2)
        return ad.sum_all(ad.softmax_lastdim(out))

    assert grad_check(f, [w1, b1, w2, b2], step=1e-5) < 1e-6


class TestGradCheck:
    def test_linear_function_near_exact(self, rng):
        w = rand64(rng, 3, 1)
        x = Tensor(rng.standard_normal((2, 3)), dtype=np.float64)

        def f():
            return ad.sum_all(ad.matmul(x, w))

        assert grad_check(f, [w], step=1e-5) < 1e-10

    def test_corrupted_reverse_rule_is_caught(self, rng):
        w = rand64(rng, 2, 2)

        def bad_double(a):
            # forward doubles, reverse pretends the factor was 3
            return ad.from_op(a.data * 2.0, (a,), lambda g: (g * 3.0,))

        def f():
            return ad.sum_all(ad.mul(bad_double(w), bad_double(w)))

        assert grad_check(f, [w], step=1e-5) > 1e-2

    def test_operator_sugar(self):
        x = t64([[1.0, 2.0]])
        y = (x * 2.0 + 1.0 - x).__neg__()
        assert np.allclose(y.data, [[-2.0, -3.0]])
        ad.sum_all(y).backward()
        assert np.allclose(x.grad, [[-1.0, -1.0]])
