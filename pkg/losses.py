"""Concrete loss models with hand-derived gradients: linear, quadratic, logistic, one-hidden-layer tanh network."""

import copy
import math

import numpy as np
from scipy.special import expit, log_expit

from core_model import AnchorSet, Decision, LossModel, theta_array
from errors import ConfigError
from utils import as_batch


def _out(arr, single):
    """Strip the batch axis again when the caller passed a single point."""
    return arr[0] if single else arr


class LinearLoss(LossModel):
    """f_theta(z) = theta . z, with d_theta = d.

    The worst-case density for this loss is Gaussian, which makes it the
    reference instance for every oracle comparison.
    """

    kind = "linear"

    def __init__(self, d, L_f1=None):
        if d < 1:
            raise ConfigError(f"dimension must be >= 1, got {d}")
        self.d = int(d)
        self.d_theta = self.d
        self.L_f1 = L_f1
        self.L_f2 = 1.0

    def value(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(zb @ theta_array(theta), single)

    def grad_theta(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(zb.copy(), single)

    def grad_z(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(np.broadcast_to(theta_array(theta), zb.shape).copy(), single)

    def grad_z_bound(self, theta=None):
        return None if theta is None else float(np.linalg.norm(theta_array(theta)))


class QuadraticLoss(LossModel):
    """f(z) = (c/2)|z|^2, independent of theta. Requires c < lambda."""

    kind = "quadratic"

    def __init__(self, c, lam, d, d_theta=1):
        if not c < lam:
            raise ConfigError(f"c must be < lambda (got c={c}, lambda={lam})")
        self.c = float(c)
        self.lam = float(lam)
        self.d = int(d)
        self.d_theta = int(d_theta)
        self.L_f1 = 0.0
        self.L_f2 = abs(self.c)

    def value(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(0.5 * self.c * np.einsum("ij,ij->i", zb, zb), single)

    def grad_theta(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(np.zeros((zb.shape[0], self.d_theta)), single)

    def grad_z(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        return _out(self.c * zb, single)


class _LabeledLoss(LossModel):
    """Base for classification losses: anchor_index selects the label y^(i) bound to each anchor."""

    def __init__(self, labels, d):
        if labels is None:
            raise ConfigError(f"{self.kind} loss needs labeled anchors")
        self.labels = np.asarray(labels, dtype=np.float64).ravel()
        self.d = int(d)

    def label(self, anchor_index):
        return self.labels[anchor_index]

    def rebind(self, labels):
        clone = copy.copy(self)
        clone.labels = np.asarray(labels, dtype=np.float64).ravel()
        return clone

    def logit(self, theta, z):
        raise NotImplementedError

    def predict(self, theta, z):
        """Predicted labels in {-1, +1}; a zero logit counts as +1."""
        return np.where(np.asarray(self.logit(theta, z)) >= 0.0, 1.0, -1.0)


class LogisticLoss(_LabeledLoss):
    """f_theta(z) = log(1 + exp(-y theta . z)) with y the anchor's label.

    Declared constants hold on |z| <= data_radius and |theta| <= theta_radius:
    |grad_theta| <= |z| and the joint Hessian norm is at most 1 + (R^2 + R_theta^2)/4.
    make_loss sets data_radius so that it also covers worst-case draws, not
    only the anchors. |grad_z| <= |theta| holds everywhere.
    """

    kind = "logistic"

    def __init__(self, labels, d, data_radius=1.0, theta_radius=1.0):
        super().__init__(labels, d)
        self.d_theta = self.d
        self.data_radius = float(data_radius)
        self.theta_radius = float(theta_radius)
        self.L_f1 = self.data_radius
        self.L_f2 = 1.0 + (data_radius ** 2 + theta_radius ** 2) / 4.0

    def grad_z_bound(self, theta=None):
        if theta is None:
            return self.theta_radius
        return float(np.linalg.norm(theta_array(theta)))

    def logit(self, theta, z):
        zb, single = as_batch(z, self.d)
        return _out(zb @ theta_array(theta), single)

    def _margin_weight(self, theta, zb, anchor_index):
        y = self.label(anchor_index)
        margin = y * (zb @ theta_array(theta))
        # d/dm log(1 + e^{-m}) = -sigmoid(-m)
        return margin, -y * expit(-margin)

    def value(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        margin, _ = self._margin_weight(theta, zb, anchor_index)
        return _out(-log_expit(margin), single)

    def grad_theta(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        _, weight = self._margin_weight(theta, zb, anchor_index)
        return _out(np.asarray(weight).reshape(-1, 1) * zb, single)

    def grad_z(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        _, weight = self._margin_weight(theta, zb, anchor_index)
        return _out(np.asarray(weight).reshape(-1, 1) * theta_array(theta)[None, :], single)


class ShallowNetLoss(_LabeledLoss):
    """Binary cross-entropy on the logit w . tanh(W z + b) + b0, gradients by manual backpropagation.

    theta is the flat vector [W (row-major H x d), b (H), w (H), b0].
    """

    kind = "shallow_net"

    def __init__(self, labels, d, hidden_width, init_seed=0):
        super().__init__(labels, d)
        if hidden_width < 1:
            raise ConfigError(f"hidden_width must be >= 1, got {hidden_width}")
        self.hidden_width = int(hidden_width)
        self.d_theta = self.hidden_width * self.d + 2 * self.hidden_width + 1
        self.init_seed = int(init_seed)
        self.L_f1 = None
        self.L_f2 = None

    def unpack(self, theta):
        t = theta_array(theta)
        if t.shape[0] != self.d_theta:
            raise ValueError(f"expected theta of length {self.d_theta}, got {t.shape[0]}")
        H, d = self.hidden_width, self.d
        W = t[:H * d].reshape(H, d)
        b = t[H * d:H * d + H]
        w = t[H * d + H:H * d + 2 * H]
        return W, b, w, t[-1]

    def initial_theta(self):
        gen = np.random.Generator(np.random.Philox(self.init_seed))
        H, d = self.hidden_width, self.d
        W = gen.standard_normal((H, d)) / np.sqrt(d)
        w = gen.standard_normal(H) / np.sqrt(H)
        return Decision(np.concatenate([W.ravel(), np.zeros(H), w, [0.0]]))

    def _forward(self, theta, zb):
        W, b, w, b0 = self.unpack(theta)
        hidden = np.tanh(zb @ W.T + b)
        return hidden, hidden @ w + b0

    def logit(self, theta, z):
        zb, single = as_batch(z, self.d)
        return _out(self._forward(theta, zb)[1], single)

    def _backward(self, theta, zb, anchor_index):
        W, b, w, b0 = self.unpack(theta)
        hidden, g = self._forward(theta, zb)
        y = self.label(anchor_index)
        dg = np.asarray(-y * expit(-y * g)).reshape(-1)
        if dg.shape[0] != zb.shape[0]:
            dg = np.broadcast_to(dg, (zb.shape[0],))
        da = dg[:, None] * w[None, :] * (1.0 - hidden ** 2)
        return hidden, dg, da, W

    def value(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        _, g = self._forward(theta, zb)
        return _out(-log_expit(self.label(anchor_index) * g), single)

    def grad_theta(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        hidden, dg, da, _ = self._backward(theta, zb, anchor_index)
        m = zb.shape[0]
        grad_W = (da[:, :, None] * zb[:, None, :]).reshape(m, -1)
        return _out(np.hstack([grad_W, da, dg[:, None] * hidden, dg[:, None]]), single)

    def grad_z(self, theta, z, anchor_index=0):
        zb, single = as_batch(z, self.d)
        _, _, da, W = self._backward(theta, zb, anchor_index)
        return _out(da @ W, single)

    def grad_z_bound(self, theta=None):
        # |dg| <= 1 and tanh' <= 1
        if theta is None:
            return None
        W, _, w, _ = self.unpack(theta)
        return float(np.sum(np.abs(w) * np.linalg.norm(W, axis=1)))


# ---------------------------------------------------------------------------
# Factory
# ---------------------------------------------------------------------------

LOSS_KINDS = ("linear", "quadratic", "logistic", "shallow_net")


def make_loss(kind, params=None, anchors: AnchorSet | None = None, hp=None) -> LossModel:
    """Build a loss model by name.

    *params* holds kind-specific keys (c, hidden_width, data_radius, ...).
    The dimension comes from params["d"] or the anchors; labels and lambda
    come from the anchors and *hp* when not given explicitly.
    """
    params = dict(params or {})
    d = params.pop("d", None)
    if d is None:
        if anchors is None:
            raise ConfigError(f"{kind} loss needs a dimension or an anchor set")
        d = anchors.d
    d = int(d)
    labels = anchors.labels if anchors is not None else None

    if kind == "linear":
        return LinearLoss(d, L_f1=params.get("L_f1"))
    if kind == "quadratic":
        if "c" not in params:
            raise ConfigError("quadratic loss needs the curvature c")
        lam = params.get("lam", hp.lam if hp is not None else None)
        if lam is None:
            raise ConfigError("quadratic loss needs lambda to check c < lambda")
        return QuadraticLoss(params["c"], lam, d, d_theta=int(params.get("d_theta", 1)))
    if kind == "logistic":
        radius = params.get("data_radius")
        theta_radius = float(params.get("theta_radius", 1.0))
        if radius is None and anchors is not None:
            radius = float(np.linalg.norm(anchors.points, axis=1).max())
            if hp is not None:
                # worst-case draws sit within |theta|/lambda plus a few sqrt(eps) of their anchor
                radius += theta_radius / hp.lam + 3.0 * math.sqrt(d * hp.epsilon)
        return LogisticLoss(labels, d, data_radius=radius if radius is not None else 1.0,
                            theta_radius=theta_radius)
    if kind == "shallow_net":
        return ShallowNetLoss(labels, d, int(params.get("hidden_width", 8)),
                              init_seed=int(params.get("init_seed", 0)))
    raise ConfigError(f"unknown loss kind '{kind}' (expected one of {', '.join(LOSS_KINDS)})")
