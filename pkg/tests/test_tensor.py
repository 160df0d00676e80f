"""Every tensor op against central finite differences, plus graph rules."""

import numpy as np
import pytest

from pathmatch.nd import grad_check, topk_rows, topk_select
from pathmatch.nd import tensor as T


def check(build, params, tol=1e-7, eps=1e-6):
    """build() returns a scalar Tensor from the named parameter Tensors."""
    err = grad_check(build, params, eps=eps)
    assert err < tol, f"max relative gradient error {err}"


def param(rng, *shape):
    return T.parameter(rng.standard_normal(shape))


def away_from_kinks(t):
    # Shift values off zero so ReLU stays on one side under perturbation.
    t.data += 0.2 * np.sign(t.data) + 1e-3
    return t


def project(x, rng):
    """Reduce any tensor to a scalar through a fixed random weighting."""
    c = T.constant(rng.standard_normal(x.data.shape))
    return T.sum_all(T.mul(x, c))


class TestElementwiseGrads:
    def test_add_sub_mul(self, rng):
        a, b = param(rng, 3, 4), param(rng, 3, 4)
        check(lambda: project(T.add(a, b), np.random.default_rng(0)), {"a": a, "b": b})
        check(lambda: project(T.sub(a, b), np.random.default_rng(1)), {"a": a, "b": b})
        check(lambda: project(T.mul(a, b), np.random.default_rng(2)), {"a": a, "b": b})

    def test_mul_scalar(self, rng):
        x = param(rng, 5)
        check(lambda: T.sum_all(T.mul_scalar(x, -2.7)), {"x": x})

    def test_add_n(self, rng):
        xs = [param(rng, 2, 3) for _ in range(4)]
        names = {f"x{i}": x for i, x in enumerate(xs)}
        check(lambda: project(T.add_n(xs), np.random.default_rng(3)), names)

    def test_add_bias(self, rng):
        x, b = param(rng, 4, 3), param(rng, 3)
        check(lambda: project(T.add_bias(x, b), np.random.default_rng(4)), {"x": x, "b": b})

    def test_scale_rows(self, rng):
        x, s = param(rng, 4, 3), param(rng, 4)
        check(lambda: project(T.scale_rows(x, s), np.random.default_rng(5)), {"x": x, "s": s})

    def test_matmul(self, rng):
        a, b = param(rng, 3, 4), param(rng, 4, 2)
        check(lambda: project(T.matmul(a, b), np.random.default_rng(6)), {"a": a, "b": b})

    def test_matmul_nt_matches_transposed_matmul(self, rng):
        a, b = param(rng, 3, 4), param(rng, 5, 4)
        assert np.allclose(T.matmul_nt(a, b).data, a.data @ b.data.T)
        check(lambda: project(T.matmul_nt(a, b), np.random.default_rng(7)), {"a": a, "b": b})

    def test_shape_mismatches_rejected(self, rng):
        with pytest.raises(ValueError):
            T.add(param(rng, 2, 3), param(rng, 3, 2))
        with pytest.raises(ValueError):
            T.scale_rows(param(rng, 4, 3), param(rng, 3))
        with pytest.raises(ValueError):
            T.matmul(param(rng, 2, 3), param(rng, 2, 3))


class TestNonlinearityGrads:
    def test_relu(self, rng):
        x = away_from_kinks(param(rng, 4, 5))
        check(lambda: project(T.relu(x), np.random.default_rng(8)), {"x": x})

    def test_relu_kink_uses_inactive_branch_at_zero(self):
        x = T.parameter(np.array([0.0, -1.0, 2.0]))
        y = T.sum_all(T.relu(x))
        y.backward()
        assert y.data == pytest.approx(2.0)
        assert x.grad.tolist() == [0.0, 0.0, 1.0]

    def test_sigmoid(self, rng):
        x = param(rng, 6)
        check(lambda: T.sum_all(T.sigmoid(x)), {"x": x})

    def test_softmax_rows_normalizes(self, rng):
        x = param(rng, 5, 7)
        out = T.softmax_rows(x)
        assert np.allclose(out.data.sum(axis=1), 1.0)
        assert (out.data > 0).all()
        check(lambda: project(T.softmax_rows(x), np.random.default_rng(9)), {"x": x})

    def test_softmax_shift_invariance(self, rng):
        v = param(rng, 9)
        shifted = T.parameter(v.data + 1000.0)
        assert np.allclose(T.softmax(v).data, T.softmax(shifted).data)

    def test_l1_normalize_rows(self, rng):
        x = T.parameter(rng.uniform(0.1, 2.0, size=(4, 5)))
        out = T.l1_normalize_rows(x)
        assert np.allclose(out.data.sum(axis=1), 1.0)
        check(lambda: project(T.l1_normalize_rows(x), np.random.default_rng(10)), {"x": x})

    def test_l2_normalize_rows(self, rng):
        x = param(rng, 4, 5)
        out = T.l2_normalize_rows(x)
        assert np.allclose((out.data**2).sum(axis=1), 1.0)
        check(lambda: project(T.l2_normalize_rows(x), np.random.default_rng(11)), {"x": x})


class TestShapeOpGrads:
    def test_reshape_and_concat(self, rng):
        a, b = param(rng, 3, 4), param(rng, 3, 2)

        def build():
            joined = T.concat_cols([a, T.reshape(T.reshape(b, (6,)), (3, 2))])
            return project(joined, np.random.default_rng(12))

        check(build, {"a": a, "b": b})

    def test_repeat_rows(self, rng):
        x = param(rng, 3, 4)
        out = T.repeat_rows(x, 2)
        assert out.data.shape == (6, 4)
        assert np.allclose(out.data[0], out.data[1])
        check(lambda: project(T.repeat_rows(x, 2), np.random.default_rng(13)), {"x": x})

    def test_block_sum_rows_inverts_repeat(self, rng):
        x = param(rng, 3, 4)
        assert np.allclose(T.block_sum_rows(T.repeat_rows(x, 5), 5).data, 5 * x.data)
        check(lambda: project(T.block_sum_rows(x, 3), np.random.default_rng(14)), {"x": x})

    def test_gather_rows_with_repeats(self, rng):
        x = param(rng, 5, 3)
        idx = np.array([0, 2, 2, 4])
        check(lambda: project(T.gather_rows(x, idx), np.random.default_rng(15)), {"x": x})

    def test_scatter_rows(self, rng):
        src = param(rng, 3, 4)
        idx = np.array([5, 0, 2])
        out = T.scatter_rows(src, idx, 6)
        assert np.allclose(out.data[idx], src.data)
        assert np.allclose(out.data[[1, 3, 4]], 0.0)
        check(lambda: project(T.scatter_rows(src, idx, 6), np.random.default_rng(16)), {"src": src})

    def test_take_elems(self, rng):
        x = param(rng, 4, 5)
        rows = np.array([0, 1, 3, 3])
        cols = np.array([2, 2, 0, 4])
        assert np.allclose(T.take_elems(x, rows, cols).data, x.data[rows, cols])
        check(lambda: T.sum_all(T.take_elems(x, rows, cols)), {"x": x})


class TestLossGrads:
    def test_sum_and_mean(self, rng):
        x = param(rng, 3, 4)
        check(lambda: T.sum_all(x), {"x": x})
        check(lambda: T.mean_all(x), {"x": x})

    def test_softmax_xent_rows(self, rng):
        logits = param(rng, 5, 4)
        targets = np.array([0, 3, 1, 1, 2])
        loss = T.softmax_xent_rows(logits, targets)
        probs = np.exp(logits.data - logits.data.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        want = -np.log(probs[np.arange(5), targets]).mean()
        assert loss.data == pytest.approx(want)
        check(lambda: T.softmax_xent_rows(logits, targets), {"logits": logits})

    def test_bce_mean(self, rng):
        p = T.parameter(rng.uniform(0.05, 0.95, size=8))
        y = rng.integers(0, 2, size=8).astype(np.float64)
        want = -np.mean(y * np.log(p.data) + (1 - y) * np.log(1 - p.data))
        assert T.bce_mean(p, y).data == pytest.approx(want)
        check(lambda: T.bce_mean(p, y), {"p": p})

    def test_bce_clamp_zeroes_gradient_outside(self):
        p = T.parameter(np.array([0.0, 1.0, 0.5]))
        loss = T.bce_mean(p, np.array([0.0, 1.0, 1.0]))
        loss.backward()
        assert np.isfinite(loss.data)
        assert p.grad[0] == 0.0 and p.grad[1] == 0.0 and p.grad[2] != 0.0


class TestGraphRules:
    def test_shared_subexpression_accumulates(self):
        x = T.parameter(np.array([3.0]))
        y = T.sum_all(T.mul(x, x))  # d/dx x^2 = 2x
        y.backward()
        assert x.grad.tolist() == [6.0]

    def test_diamond_graph(self):
        x = T.parameter(np.array([2.0]))
        a = T.mul_scalar(x, 3.0)
        b = T.mul_scalar(x, 5.0)
        out = T.sum_all(T.add(a, b))
        out.backward()
        assert x.grad.tolist() == [8.0]

    def test_backward_requires_scalar(self, rng):
        x = param(rng, 3)
        with pytest.raises(ValueError):
            T.relu(x).backward()

    def test_constants_get_no_grad(self, rng):
        c = T.constant(rng.standard_normal(4))
        x = param(rng, 4)
        T.sum_all(T.mul(x, c)).backward()
        assert c.grad is None
        assert x.grad is not None


class TestTopK:
    def test_matches_sort_oracle(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 12))
            k = int(rng.integers(1, n + 1))
            # Quantized scores create ties routinely.
            scores = rng.integers(0, 4, size=n).astype(np.float64)
            want = sorted(sorted(range(n), key=lambda i: (-scores[i], i))[:k])
            assert topk_select(scores, k).tolist() == want

    def test_ties_prefer_smaller_index(self):
        assert topk_select(np.array([1.0, 1.0, 1.0]), 2).tolist() == [0, 1]

    def test_result_in_original_order(self):
        assert topk_select(np.array([0.1, 0.9, 0.5, 0.8]), 2).tolist() == [1, 3]

    def test_rows_variant_matches_per_row(self, rng):
        scores = rng.integers(0, 4, size=(6, 7)).astype(np.float64)
        rows = topk_rows(scores, 3)
        for i in range(6):
            assert rows[i].tolist() == topk_select(scores[i], 3).tolist()

    def test_bad_k_rejected(self, rng):
        with pytest.raises(ValueError):
            topk_select(np.array([0.5, 0.2]), 3)
        with pytest.raises(ValueError):
            topk_select(np.array([0.5, 0.2]), 0)
