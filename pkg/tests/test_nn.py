"""MLP init/apply, Adam, and Polyak smoothing."""

import numpy as np
import pytest

from drac import autodiff as ad
from drac.autodiff import Array, AutodiffError
from drac.nn import (
    AdamState,
    MlpParams,
    adam_init,
    adam_step,
    mlp_apply,
    mlp_apply_numpy,
    mlp_init,
    mlp_parameters,
    polyak_update,
)


def zeroed(net: MlpParams) -> MlpParams:
    for w, b in net.layers:
        w.data[:] = 0.0
        b.data[:] = 0.0
    return net


class TestInit:
    def test_shapes_for_standard_net(self):
        net = mlp_init((2, 256, 256, 1), "identity", seed=7)
        shapes = [(w.shape, b.shape) for w, b in net.layers]
        assert shapes == [((256, 2), (256,)), ((256, 256), (256,)), ((1, 256), (1,))]

    def test_same_seed_is_bit_identical(self):
        a = mlp_init((3, 8, 2), "tanh", seed=11)
        b = mlp_init((3, 8, 2), "tanh", seed=11)
        for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
            np.testing.assert_array_equal(wa.data, wb.data)
            np.testing.assert_array_equal(ba.data, bb.data)

    def test_weight_bound_and_zero_biases(self):
        net = mlp_init((5, 16, 4), seed=3)
        for w, b in net.layers:
            fan_in = w.shape[1]
            assert np.max(np.abs(w.data)) <= 1.0 / np.sqrt(fan_in)
            np.testing.assert_array_equal(b.data, 0.0)

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError, match="at least one layer"):
            mlp_init((4,))
        with pytest.raises(ValueError, match="positive"):
            mlp_init((4, 0, 2))


class TestApply:
    def test_zero_net_identity_output_is_zero(self):
        net = zeroed(mlp_init((3, 4, 2), "identity", seed=0))
        np.testing.assert_array_equal(mlp_apply(net, Array([1.0, -2.0, 3.0])).data, [0.0, 0.0])

    def test_zero_weights_bias_tanh_is_constant(self):
        net = zeroed(mlp_init((3, 4, 2), "tanh", seed=0))
        net.layers[-1][1].data[:] = [0.5, -1.0]
        out = mlp_apply(net, Array([9.0, 9.0, 9.0]))
        np.testing.assert_allclose(out.data, np.tanh([0.5, -1.0]), rtol=0, atol=0)

    def test_small_net_matches_hand_computation(self):
        net = mlp_init((2, 2, 1), "identity", seed=5)
        x = np.array([0.3, -0.7])
        (w1, b1), (w2, b2) = net.layers
        hand = w2.data @ np.maximum(w1.data @ x + b1.data, 0.0) + b2.data
        np.testing.assert_allclose(mlp_apply(net, Array(x)).data, hand, atol=1e-12)

    def test_tanh_output_bounded(self):
        net = mlp_init((3, 8, 2), "tanh", seed=1)
        rng = np.random.default_rng(0)
        out = mlp_apply(net, Array(rng.standard_normal((50, 3)) * 10)).data
        assert np.all(out > -1.0) and np.all(out < 1.0)

    def test_numpy_path_matches_graph_path(self):
        net = mlp_init((4, 8, 8, 2), "tanh", seed=9)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((6, 4))
        np.testing.assert_array_equal(mlp_apply(net, Array(x)).data, mlp_apply_numpy(net, x))

    def test_shape_mismatch_raises(self):
        net = mlp_init((3, 4, 1), seed=0)
        with pytest.raises(ad.ShapeMismatch):
            mlp_apply(net, Array([1.0, 2.0]))


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        p = Array(np.array([1.0, -2.0]), requires_grad=True)
        state = adam_init([p], lr=1e-3)
        grads = {p: Array(np.zeros(2))}
        new_params, new_state = adam_step([p], grads, state)
        np.testing.assert_array_equal(new_params[0].data, p.data)
        assert new_state.step_count == 1

    def test_first_step_moves_by_lr_in_sign_direction(self):
        p = Array(np.array([0.0, 0.0]), requires_grad=True)
        state = adam_init([p], lr=1e-3)
        g = np.array([100.0, -50.0])
        new_params, _ = adam_step([p], {p: Array(g)}, state)
        delta = new_params[0].data - p.data
        np.testing.assert_allclose(delta, -1e-3 * np.sign(g), atol=1e-9 * 1e-3)

    def test_two_steps_shrink_quadratic(self):
        p = Array(np.array([1.0]), requires_grad=True)
        state = adam_init([p], lr=0.05)
        losses = []
        for _ in range(2):
            loss = ad.mean(ad.scale(ad.square(p), 0.5))
            losses.append(loss.item())
            grads = ad.gradients(loss, [p])
            new_params, state = adam_step([p], grads, state)
            p = new_params[0]
        final = 0.5 * float(p.data[0]) ** 2
        assert losses[1] < losses[0] and final < losses[1]

    def test_missing_gradient_entry_is_error(self):
        p, q = (Array(np.ones(2), requires_grad=True) for _ in range(2))
        state = adam_init([p, q], lr=1e-3)
        with pytest.raises(AutodiffError, match="missing gradient"):
            adam_step([p, q], {p: Array(np.ones(2))}, state)


class TestPolyak:
    def _pair(self):
        online = mlp_init((2, 3, 1), seed=1)
        target = mlp_init((2, 3, 1), seed=2)
        return target, online

    def test_rho_one_copies_online(self):
        target, online = self._pair()
        out = polyak_update(target, online, 1.0)
        for (ow, ob), (nw, nb) in zip(online.layers, out.layers):
            np.testing.assert_array_equal(nw.data, ow.data)
            np.testing.assert_array_equal(nb.data, ob.data)

    def test_rho_zero_keeps_target(self):
        target, online = self._pair()
        out = polyak_update(target, online, 0.0)
        for (tw, tb), (nw, nb) in zip(target.layers, out.layers):
            np.testing.assert_array_equal(nw.data, tw.data)
            np.testing.assert_array_equal(nb.data, tb.data)

    def test_default_smoothing_value(self):
        target, online = self._pair()
        for w, b in target.layers:
            w.data[:] = 0.0
            b.data[:] = 0.0
        for w, b in online.layers:
            w.data[:] = 1.0
            b.data[:] = 1.0
        out = polyak_update(target, online, 0.005)
        for w, b in out.layers:
            np.testing.assert_allclose(w.data, 0.005, rtol=0, atol=0)
            np.testing.assert_allclose(b.data, 0.005, rtol=0, atol=0)

    def test_convex_combination_property(self):
        target, online = self._pair()
        out = polyak_update(target, online, 0.3)
        for (tw, _), (ow, _), (nw, _) in zip(target.layers, online.layers, out.layers):
            lo = np.minimum(tw.data, ow.data)
            hi = np.maximum(tw.data, ow.data)
            assert np.all(nw.data >= lo - 1e-15) and np.all(nw.data <= hi + 1e-15)

    def test_shape_mismatch_rejected(self):
        target = mlp_init((2, 3, 1), seed=1)
        online = mlp_init((2, 4, 1), seed=1)
        with pytest.raises(ValueError, match="shape mismatch"):
            polyak_update(target, online, 0.5)

    def test_rho_out_of_range_rejected(self):
        target, online = self._pair()
        with pytest.raises(ValueError, match="rho"):
            polyak_update(target, online, 1.5)


def test_parameter_ordering_is_weight_then_bias():
    net = mlp_init((2, 3, 1), seed=0)
    flat = mlp_parameters(net)
    assert [p.shape for p in flat] == [(3, 2), (3,), (1, 3), (1,)]
