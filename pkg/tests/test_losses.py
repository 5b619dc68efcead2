import numpy as np
import pytest

from core_model import AnchorSet, HyperParams
from errors import ConfigError
from gradient_check import check_gradients
from losses import LinearLoss, LogisticLoss, QuadraticLoss, ShallowNetLoss, make_loss
from settings import FD_REL_TOL


def test_linear_loss_values_and_gradients():
    model = LinearLoss(2)
    theta = np.array([1.0, -2.0])
    z = np.array([[1.0, 1.0], [0.5, 2.0]])
    np.testing.assert_allclose(model.value(theta, z), [-1.0, -3.5])
    np.testing.assert_allclose(model.grad_theta(theta, z), z)
    np.testing.assert_allclose(model.grad_z(theta, z), np.tile(theta, (2, 1)))
    assert model.value(theta, z[0]) == pytest.approx(-1.0)


def test_quadratic_loss_requires_c_below_lambda():
    with pytest.raises(ConfigError, match="c must be < lambda"):
        QuadraticLoss(2.0, 2.0, 1)
    model = QuadraticLoss(0.5, 2.0, 1)
    assert model.value(np.zeros(1), np.array([2.0])) == pytest.approx(1.0)
    np.testing.assert_array_equal(model.grad_theta(np.zeros(1), np.array([[1.0], [2.0]])), np.zeros((2, 1)))
    np.testing.assert_allclose(model.grad_z(np.zeros(1), np.array([2.0])), [1.0])


def test_labeled_losses_need_labels():
    with pytest.raises(ConfigError, match="labeled anchors"):
        LogisticLoss(None, 2)
    with pytest.raises(ConfigError, match="labeled anchors"):
        make_loss("shallow_net", anchors=AnchorSet(np.zeros((3, 2))))


def test_logistic_loss_is_stable_for_large_margins():
    model = LogisticLoss(np.array([1.0]), 1)
    assert model.value(np.array([1000.0]), np.array([1.0])) == pytest.approx(0.0, abs=1e-300)
    assert model.value(np.array([-1000.0]), np.array([1.0])) == pytest.approx(1000.0)


@pytest.mark.parametrize("seed", range(3))
def test_logistic_gradients_match_finite_differences(seed):
    gen = np.random.default_rng(seed)
    model = LogisticLoss(np.array([1.0, -1.0]), 3)
    for anchor_index in (0, 1):
        report = check_gradients(model, gen.normal(size=3), gen.normal(size=3), anchor_index=anchor_index)
        assert report.passes(FD_REL_TOL)


@pytest.mark.parametrize("hidden_width", [1, 4, 16])
def test_shallow_net_gradients_match_finite_differences(hidden_width):
    gen = np.random.default_rng(hidden_width)
    model = ShallowNetLoss(np.array([1.0, -1.0]), 2, hidden_width=hidden_width)
    for draw in range(20):
        theta = model.initial_theta().theta + 0.1 * gen.normal(size=model.d_theta)
        report = check_gradients(model, theta, gen.normal(size=2), anchor_index=draw % 2)
        assert report.passes(FD_REL_TOL), (draw, report)


_SHIPPED_LOSSES = {
    "linear": LinearLoss(2),
    "quadratic": QuadraticLoss(0.5, 2.0, 2),
    "logistic": LogisticLoss(np.array([1.0, -1.0]), 2),
    "shallow_net": ShallowNetLoss(np.array([1.0, -1.0]), 2, hidden_width=4),
}


@pytest.mark.parametrize("kind", sorted(_SHIPPED_LOSSES))
def test_every_loss_passes_the_gradient_check(kind):
    model = _SHIPPED_LOSSES[kind]
    gen = np.random.default_rng(7)
    for draw in range(100):
        theta = gen.normal(size=model.d_theta)
        report = check_gradients(model, theta, gen.normal(size=model.d), anchor_index=draw % 2)
        assert report.passes(FD_REL_TOL), (draw, report)


def test_logistic_loss_is_convex_in_theta():
    model = LogisticLoss(np.array([1.0, -1.0]), 3)
    gen = np.random.default_rng(11)
    for draw in range(200):
        t1, t2 = 2.0 * gen.normal(size=3), 2.0 * gen.normal(size=3)
        z = gen.normal(size=3)
        anchor_index = draw % 2
        mid = model.value((t1 + t2) / 2.0, z, anchor_index)
        ends = (model.value(t1, z, anchor_index) + model.value(t2, z, anchor_index)) / 2.0
        assert mid <= ends + 1e-12


def test_grad_z_bounds():
    theta = np.array([3.0, 4.0])
    assert LinearLoss(2).grad_z_bound(theta) == pytest.approx(5.0)
    assert LinearLoss(2).grad_z_bound() is None
    assert QuadraticLoss(0.5, 2.0, 2).grad_z_bound(np.zeros(1)) is None
    logistic = LogisticLoss(np.array([1.0, -1.0]), 2, theta_radius=2.5)
    assert logistic.grad_z_bound(theta) == pytest.approx(5.0)
    assert logistic.grad_z_bound() == 2.5
    gen = np.random.default_rng(3)
    z = gen.normal(size=(500, 2))
    for anchor_index in (0, 1):
        norms = np.linalg.norm(logistic.grad_z(theta, z, anchor_index), axis=1)
        assert norms.max() <= logistic.grad_z_bound(theta)
    net = ShallowNetLoss(np.array([1.0, -1.0]), 2, hidden_width=3)
    net_theta = net.initial_theta().theta + gen.normal(size=net.d_theta)
    W, _, w, _ = net.unpack(net_theta)
    assert net.grad_z_bound(net_theta) == pytest.approx(np.sum(np.abs(w) * np.linalg.norm(W, axis=1)))
    assert net.grad_z_bound() is None
    for anchor_index in (0, 1):
        norms = np.linalg.norm(net.grad_z(net_theta, 3.0 * z, anchor_index), axis=1)
        assert norms.max() <= net.grad_z_bound(net_theta) + 1e-12


def test_logistic_radius_covers_worst_case_draws():
    anchors = AnchorSet(np.array([[3.0, 4.0], [0.0, 1.0]]), np.array([1, -1]))
    hp = HyperParams(2.0, 0.1)
    model = make_loss("logistic", {"theta_radius": 1.0}, anchors=anchors, hp=hp)
    assert model.L_f1 == pytest.approx(5.0 + 0.5 + 3.0 * np.sqrt(0.2))
    assert model.L_f2 == pytest.approx(1.0 + (model.L_f1 ** 2 + 1.0) / 4.0)
    assert make_loss("logistic", {"data_radius": 2.0}, anchors=anchors, hp=hp).L_f1 == 2.0


def test_shallow_net_layout():
    model = ShallowNetLoss(np.array([1.0]), 3, hidden_width=5)
    assert model.d_theta == 5 * 3 + 2 * 5 + 1
    W, b, w, b0 = model.unpack(np.arange(model.d_theta, dtype=float))
    assert W.shape == (5, 3) and b.shape == (5,) and w.shape == (5,)
    assert b0 == model.d_theta - 1


def test_batched_labels_follow_anchor_index():
    model = LogisticLoss(np.array([1.0, -1.0]), 1)
    theta = np.array([2.0])
    z = np.array([[1.0], [1.0]])
    batched = model.value(theta, z, np.array([0, 1]))
    assert batched[0] == pytest.approx(model.value(theta, z[0], 0))
    assert batched[1] == pytest.approx(model.value(theta, z[1], 1))


def test_rebind_swaps_labels_without_touching_the_original():
    model = LogisticLoss(np.array([1.0]), 1)
    flipped = model.rebind(np.array([-1.0]))
    assert model.label(0) == 1.0 and flipped.label(0) == -1.0


def test_make_loss_builds_every_kind():
    anchors = AnchorSet(np.array([[3.0, 4.0], [0.0, 1.0]]), np.array([1, -1]))
    hp = HyperParams(2.0, 0.1)
    assert make_loss("linear", anchors=anchors).d_theta == 2
    assert make_loss("quadratic", {"c": 0.5}, anchors=anchors, hp=hp).c == 0.5
    assert make_loss("logistic", anchors=anchors).L_f1 == pytest.approx(5.0)
    assert make_loss("shallow_net", {"hidden_width": 3}, anchors=anchors).hidden_width == 3
    with pytest.raises(ConfigError, match="unknown loss kind"):
        make_loss("hinge", anchors=anchors)
    with pytest.raises(ConfigError, match="curvature"):
        make_loss("quadratic", anchors=anchors, hp=hp)
