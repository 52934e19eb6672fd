"""Independent numerical oracles for the gradient machinery.

Everything here is computed by finite differences of scalar losses, never by
the backward pass or the meta-gradient recursion it is used to check. The
``gradcheck`` CLI command and the test-suite both call into this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bilevel import (
    MLCModel,
    MetaGradState,
    accumulate_meta_grad,
    main_step,
    meta_loss_grad,
    mixed_hvp_fd,
)
from .data import LabeledSet, gen_blobs
from .diffcore import Graph, ParamVector, grad_check
from .models import Classifier, ClassifierConfig, LabelCorrectionNet, LcnConfig, soft_cross_entropy
from .optim import SGDMomentum


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def random_instance(seed: int, num_classes: int = 2, input_dim: int = 2, hidden=(8,), lcn_hidden: int = 6,
                    embed: int = 4, n_noisy: int = 12, n_clean: int = 8):
    """Small MLC problem: blob data, random noisy labels, freshly initialized nets."""
    rng = np.random.default_rng(seed)
    ccfg = ClassifierConfig(input_dim, tuple(hidden), num_classes)
    lcfg = LcnConfig(num_classes, ccfg.feature_dim, lcn_hidden, embed)
    model = MLCModel.from_configs(ccfg, lcfg)
    w = model.classifier.init_params(rng)
    alpha = model.lcn.init_params(rng)
    # larger embedding scale than the training default so alpha-gradients are not tiny
    alpha = ParamVector({k: (v * 50 if k == "embed" else v) for k, v in alpha.items()})
    x, y = gen_blobs(num_classes, input_dim, (n_noisy + 2 * n_clean) // num_classes + 1, 1.0, seed)
    order = rng.permutation(len(y))
    x, y = x[order] / 3.0, y[order]
    noisy = LabeledSet(x[:n_noisy], rng.integers(0, num_classes, n_noisy))
    clean_train = LabeledSet(x[n_noisy : n_noisy + n_clean // 2], y[n_noisy : n_noisy + n_clean // 2])
    eval_half = LabeledSet(x[n_noisy + n_clean // 2 : n_noisy + n_clean], y[n_noisy + n_clean // 2 : n_noisy + n_clean])
    return model, w, alpha, noisy, clean_train, eval_half


def training_loss_value(model: MLCModel, w, alpha, noisy, clean_train, features) -> float:
    return float(model.training_loss(w, alpha, noisy, clean_train, features).loss.value)


def unrolled_objective(model: MLCModel, w, alpha, noisy, clean_train, eval_half, lr, features) -> float:
    """``L_D(w - lr * grad_w L_D'(alpha, w))`` on the evaluation half."""
    step = main_step(model, w, alpha, noisy, clean_train, SGDMomentum(0.0), lr)
    return float(model.clean_loss(step.w_new, eval_half)[1].value)


def fd_over_alpha(fn, alpha: ParamVector, eps: float) -> ParamVector:
    base = alpha.flat()
    out = np.empty_like(base)
    for i in range(base.size):
        p = base.copy()
        p[i] += eps
        up = fn(alpha.unflatten(p))
        p[i] -= 2 * eps
        out[i] = (up - fn(alpha.unflatten(p))) / (2 * eps)
    return alpha.unflatten(out)


@dataclass
class AnchorResult:
    cosine: float
    rel_norm_error: float
    implemented: np.ndarray
    oracle: np.ndarray


def meta_gradient_anchor(seed: int, lr: float = 0.5, eps: float = 1e-5, fd_epsilon_scale: float = 0.01) -> AnchorResult:
    """First meta step with k=1 versus FD of the one-step unrolled objective."""
    model, w, alpha, noisy, clean_train, eval_half = random_instance(seed)
    step = main_step(model, w, alpha, noisy, clean_train, SGDMomentum(0.9), lr)
    _, g_wp = meta_loss_grad(model, step.w_new, eval_half)
    state = MetaGradState.fresh(alpha, w, lr)
    hvp = mixed_hvp_fd(model, alpha, w, noisy, clean_train, state.lr_diag * g_wp, fd_epsilon_scale, step.features)
    accumulate_meta_grad(state, step.g_w, g_wp, hvp)
    implemented = state.prev_meta_grad.flat()
    feats = step.features
    oracle = fd_over_alpha(
        lambda a: unrolled_objective(model, w, a, noisy, clean_train, eval_half, lr, feats), alpha, eps
    ).flat()
    rel = float(np.linalg.norm(implemented - oracle) / np.linalg.norm(oracle))
    return AnchorResult(cosine(implemented, oracle), rel, implemented, oracle)


@dataclass
class HvpResult:
    rel_error: float
    implemented: np.ndarray
    oracle: np.ndarray


def double_fd_mixed_hvp(model, alpha, w, noisy, clean_train, v: ParamVector, features, eps_alpha=1e-4, eps_w=1e-4):
    """``d/d alpha [ (L(alpha, w + h v) - L(alpha, w - h v)) / 2h ]`` by nested central differences."""
    h = eps_w / v.norm()

    def directional(a):
        up = training_loss_value(model, w + v * h, a, noisy, clean_train, features)
        down = training_loss_value(model, w - v * h, a, noisy, clean_train, features)
        return (up - down) / (2 * h)

    return fd_over_alpha(directional, alpha, eps_alpha)


def mixed_hvp_check(seed: int, fd_epsilon_scale: float = 0.01) -> HvpResult:
    model, w, alpha, noisy, clean_train, _ = random_instance(seed)
    rng = np.random.default_rng(seed + 10_000)
    v = w.unflatten(rng.standard_normal(w.total_len) * 0.1)
    feats = model.training_loss(w, alpha, noisy, clean_train).features
    implemented = mixed_hvp_fd(model, alpha, w, noisy, clean_train, v, fd_epsilon_scale, feats).flat()
    oracle = double_fd_mixed_hvp(model, alpha, w, noisy, clean_train, v, feats).flat()
    rel = float(np.linalg.norm(implemented - oracle) / np.linalg.norm(oracle))
    return HvpResult(rel, implemented, oracle)


def random_architecture(rng: np.random.Generator):
    c = int(rng.integers(2, 5))
    ccfg = ClassifierConfig(int(rng.integers(1, 4)), tuple(int(h) for h in rng.integers(1, 6, size=rng.integers(1, 3))), c)
    lcfg = LcnConfig(c, ccfg.feature_dim, int(rng.integers(1, 6)), int(rng.integers(1, 5)))
    return ccfg, lcfg


def classifier_gradcheck(seed: int, tol: float = 1e-4):
    """Soft cross-entropy of a random-architecture classifier, gradient over w."""
    rng = np.random.default_rng(seed)
    ccfg, _ = random_architecture(rng)
    clf = Classifier(ccfg)
    w = clf.init_params(rng)
    w = w + w.unflatten(rng.normal(0, 0.1, w.total_len))  # nonzero biases
    n = int(rng.integers(1, 6))
    x = rng.normal(size=(n, ccfg.input_dim))
    target = rng.dirichlet(np.ones(ccfg.num_classes), size=n)

    def loss_fn(p):
        g = Graph()
        logits, _ = clf.forward(g, x, g.bind(p))
        return g, soft_cross_entropy(target, logits)

    return grad_check(loss_fn, w, tol)


def lcn_gradcheck(seed: int, tol: float = 1e-4):
    """Soft cross-entropy against fixed logits with LCN-produced targets, gradient over alpha."""
    rng = np.random.default_rng(seed)
    _, lcfg = random_architecture(rng)
    lcn = LabelCorrectionNet(lcfg)
    alpha = lcn.init_params(rng)
    alpha = alpha + alpha.unflatten(rng.normal(0, 0.3, alpha.total_len))
    n = int(rng.integers(1, 6))
    feats = np.tanh(rng.normal(size=(n, lcfg.feature_dim)))
    labels = rng.integers(0, lcfg.num_classes, n)
    logits_value = rng.normal(size=(n, lcfg.num_classes))

    def loss_fn(p):
        g = Graph()
        y_c = lcn.forward(g, feats, labels, g.bind(p))
        return g, soft_cross_entropy(y_c, g.constant(logits_value))

    return grad_check(loss_fn, alpha, tol)
