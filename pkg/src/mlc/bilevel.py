"""Joint training of the classifier and the label correction network.

The meta-gradient over the LCN parameters is carried across a window of ``k``
main-model steps by the recursion

    d L_D(w') / d alpha  ~=  c * d L_D(w) / d alpha  -  g_{w'} Lambda H_{alpha,w}
    c = <g_{w'}, (1 - Lambda) g_w> / ||g_w||^2

with ``H_{w,w}`` replaced by the identity. The mixed second-derivative term is
obtained from two extra gradient evaluations over alpha at ``w +/- eps * v``.
The accumulator starts each window at zero, i.e. ``dw/dalpha = 0`` at the
window start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .data import CyclingBatches, LabeledSet, TrainingData, batch_iter
from .diffcore import Graph, ParamVector
from .metrics import evaluate
from .models import Classifier, ClassifierConfig, LabelCorrectionNet, LcnConfig, one_hot, soft_cross_entropy_per_example
from .optim import SGDMomentum, make_optimizer

log = logging.getLogger(__name__)

METHODS = ("mlc", "clean_only", "noisy_only", "clean_plus_noisy")
CLS, LCN = "cls.", "lcn."


class BilevelError(ValueError):
    pass


class NonFiniteStepError(ArithmeticError):
    def __init__(self, loss, grad_norm):
        self.loss = loss
        self.grad_norm = grad_norm
        super().__init__(f"non-finite training step: loss={loss!r}, |g_w|={grad_norm!r}")


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class TrainConfig:
    k: int = 5
    main_lr: float = 0.1
    meta_lr: float = 0.03
    main_momentum: float = 0.9
    meta_optimizer: str = "sgd_momentum"
    meta_momentum: float = 0.9
    batch_size_noisy: int = 100
    batch_size_clean: int = 40
    epochs: int = 10
    seed: int = 0
    fd_epsilon_scale: float = 0.01
    lr_milestones: tuple[float, ...] = (0.6, 0.8)
    lr_decay: float = 0.1
    # direction g_w in the carried-term scalar c: "train" = training-loss gradient at w,
    # "clean" = clean-loss gradient at w on the current evaluation half
    carry_direction: str = "clean"
    max_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "lr_milestones", tuple(float(m) for m in self.lr_milestones))
        if not 1 <= self.k <= 100:
            raise BilevelError(f"k must lie in [1, 100], got {self.k}")
        if self.main_lr <= 0 or self.meta_lr < 0 or self.fd_epsilon_scale <= 0:
            raise BilevelError("main_lr and fd_epsilon_scale must be > 0, meta_lr >= 0")
        if not 0.0 <= self.main_momentum < 1.0 or not 0.0 <= self.meta_momentum < 1.0:
            raise BilevelError("momentum values must lie in [0, 1)")
        if self.meta_optimizer not in ("sgd_momentum", "adam"):
            raise BilevelError(f"meta_optimizer must be 'sgd_momentum' or 'adam', got {self.meta_optimizer!r}")
        if self.carry_direction not in ("train", "clean"):
            raise BilevelError(f"carry_direction must be 'train' or 'clean', got {self.carry_direction!r}")
        if self.batch_size_noisy < 1 or self.batch_size_clean < 2 or self.epochs < 1:
            raise BilevelError("batch_size_noisy >= 1, batch_size_clean >= 2 and epochs >= 1 required")

    def lr_factor(self, epoch: int) -> float:
        """Step decay by ``lr_decay`` at each milestone fraction of the run."""
        passed = sum(epoch >= int(round(m * self.epochs)) for m in self.lr_milestones)
        return self.lr_decay**passed


@dataclass
class MetaGradState:
    prev_meta_grad: ParamVector
    lr_diag: ParamVector
    steps_since_meta_update: int = 0
    skipped_first_terms: int = 0

    @classmethod
    def fresh(cls, alpha: ParamVector, w: ParamVector, lr: float) -> "MetaGradState":
        return cls(alpha.zeros_like(), w.full_like(lr))


@dataclass
class LossEval:
    graph: Graph
    loss: dc.Node
    noisy_loss: float
    corrected: np.ndarray | None
    features: np.ndarray


@dataclass
class MainStepResult:
    w_new: ParamVector
    g_w: ParamVector
    loss: float
    noisy_loss: float
    corrected: np.ndarray | None
    features: np.ndarray  # classifier features of the noisy batch at the pre-step w


class MLCModel:
    """Pairs the classifier and the LCN and builds the training objective."""

    def __init__(self, classifier: Classifier, lcn: LabelCorrectionNet | None):
        self.classifier = classifier
        self.lcn = lcn
        self.num_classes = classifier.config.num_classes

    @classmethod
    def from_configs(cls, ccfg: ClassifierConfig, lcfg: LcnConfig | None) -> "MLCModel":
        return cls(Classifier(ccfg), LabelCorrectionNet(lcfg) if lcfg is not None else None)

    def training_loss(
        self,
        w: ParamVector,
        alpha: ParamVector | None,
        noisy: LabeledSet | None,
        clean_train: LabeledSet | None,
        features=None,
    ) -> LossEval:
        """Mean soft cross-entropy over corrected noisy rows and one-hot clean rows.

        ``alpha=None`` uses the one-hot noisy labels unchanged. ``features``,
        when given, replaces the classifier features fed to the LCN (they are
        constants either way).
        """
        graph = Graph()
        wn = graph.bind(w, CLS)
        c = self.num_classes
        logits, targets = [], []
        corrected, feats, n_noisy = None, None, 0
        if noisy is not None and len(noisy):
            n_noisy = len(noisy)
            logit_n, feat_n = self.classifier.forward(graph, noisy.x, wn)
            feats = feat_n.value
            logits.append(logit_n)
            if alpha is None:
                targets.append(graph.constant(one_hot(noisy.y, c)))
            else:
                if self.lcn is None:
                    raise BilevelError("alpha supplied but model has no LCN")
                src = graph.constant(features) if features is not None else feat_n
                y_c = self.lcn.forward(graph, src, noisy.y, alpha, LCN)
                corrected = y_c.value
                targets.append(y_c)
        if clean_train is not None and len(clean_train):
            logit_c, _ = self.classifier.forward(graph, clean_train.x, wn)
            logits.append(logit_c)
            targets.append(graph.constant(one_hot(clean_train.y, c)))
        if not logits:
            raise BilevelError("training loss needs at least one example")
        if alpha is not None and not (noisy is not None and len(noisy)):
            graph.bind(alpha, LCN)
        per = soft_cross_entropy_per_example(
            dc.concat(targets, axis=0) if len(targets) > 1 else targets[0],
            dc.concat(logits, axis=0) if len(logits) > 1 else logits[0],
        )
        loss = dc.mean(per)
        noisy_loss = float(per.value[:n_noisy].mean()) if n_noisy else float("nan")
        return LossEval(graph, loss, noisy_loss, corrected, feats)

    def grad_alpha(self, w, alpha, noisy, clean_train, features=None) -> ParamVector:
        ev = self.training_loss(w, alpha, noisy, clean_train, features)
        return dc.grads_to_params(dc.backward(ev.graph, ev.loss), alpha, LCN)

    def clean_loss(self, w: ParamVector, clean: LabeledSet):
        graph = Graph()
        logits, _ = self.classifier.forward(graph, clean.x, w, CLS)
        per = soft_cross_entropy_per_example(one_hot(clean.y, self.num_classes), logits)
        return graph, dc.mean(per)


def split_clean_batch(batch: LabeledSet, seed) -> tuple[LabeledSet, LabeledSet]:
    """Random halves; the evaluation half gets the extra row when the size is odd."""
    n = len(batch)
    if n < 2:
        raise BilevelError(f"clean batch needs at least 2 rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_eval = (n + 1) // 2
    return batch.take(np.sort(perm[:n_eval])), batch.take(np.sort(perm[n_eval:]))


def main_step(
    model: MLCModel,
    w: ParamVector,
    alpha: ParamVector | None,
    noisy: LabeledSet | None,
    clean_train: LabeledSet | None,
    optimizer: SGDMomentum,
    lr: float,
) -> MainStepResult:
    """One optimizer step of the classifier on the (corrected) training batch."""
    ev = model.training_loss(w, alpha, noisy, clean_train)
    g_w = dc.grads_to_params(dc.backward(ev.graph, ev.loss), w, CLS)
    loss = float(ev.loss.value)
    if not (math.isfinite(loss) and g_w.is_finite()):
        raise NonFiniteStepError(loss, g_w.norm() if g_w.is_finite() else float("nan"))
    w_new = optimizer.step(w, g_w, lr) if lr != 0 else w.copy()
    return MainStepResult(w_new, g_w, loss, ev.noisy_loss, ev.corrected, ev.features)


def meta_loss_grad(model: MLCModel, w_prime: ParamVector, eval_half: LabeledSet) -> tuple[float, ParamVector]:
    """Mean one-hot cross-entropy on the clean evaluation half and its gradient over w."""
    if eval_half is None or len(eval_half) == 0:
        raise BilevelError("meta loss needs a non-empty clean evaluation set")
    graph, loss = model.clean_loss(w_prime, eval_half)
    return float(loss.value), dc.grads_to_params(dc.backward(graph, loss), w_prime, CLS)


def central_difference_hvp(grad_fn, w: ParamVector, v: ParamVector, eps_scale: float = 0.01) -> ParamVector | None:
    """``(grad_fn(w + eps v) - grad_fn(w - eps v)) / (2 eps)`` with ``eps = eps_scale / |v|``.

    Returns None when ``v`` is zero; callers substitute a zero vector of the
    right layout.
    """
    vnorm = v.norm()
    if vnorm == 0.0:
        return None
    eps = eps_scale / vnorm
    return (grad_fn(w + v * eps) - grad_fn(w - v * eps)) / (2.0 * eps)


def mixed_hvp_fd(
    model: MLCModel,
    alpha: ParamVector,
    w: ParamVector,
    noisy: LabeledSet,
    clean_train: LabeledSet | None,
    v: ParamVector,
    eps_scale: float = 0.01,
    features=None,
) -> ParamVector:
    """Approximate ``grad_alpha( grad_w L(alpha, w) . v )`` by central differences over w.

    The LCN input features are held at their value for the unperturbed ``w``
    (computed here when not supplied), matching the stop-gradient on that path.
    """
    if features is None:
        features = model.training_loss(w, alpha, noisy, clean_train).features
    out = central_difference_hvp(
        lambda wp: model.grad_alpha(wp, alpha, noisy, clean_train, features), w, v, eps_scale
    )
    return alpha.zeros_like() if out is None else out


def accumulate_meta_grad(state: MetaGradState, g_w: ParamVector, g_wp: ParamVector, hvp_term: ParamVector) -> MetaGradState:
    gw_sq = g_w.dot(g_w)
    if gw_sq < 1e-20:
        c = 0.0
        state.skipped_first_terms += 1
        log.debug("|g_w|^2=%g below threshold; dropping carried meta-gradient term", gw_sq)
    else:
        c = g_wp.dot((1.0 - state.lr_diag) * g_w) / gw_sq
    state.prev_meta_grad = state.prev_meta_grad * c - hvp_term
    state.steps_since_meta_update += 1
    return state


def meta_step(alpha: ParamVector, state: MetaGradState, optimizer, lr: float, k: int) -> ParamVector:
    """Descend the accumulated meta-gradient once the window of ``k`` steps is full."""
    if state.steps_since_meta_update != k:
        raise BilevelError(
            f"meta_step called mid-window: {state.steps_since_meta_update} of {k} steps accumulated"
        )
    grad = state.prev_meta_grad
    alpha_new = optimizer.step(alpha, grad, lr) if lr != 0 else alpha.copy()
    state.prev_meta_grad = alpha.zeros_like()
    state.steps_since_meta_update = 0
    return alpha_new


@dataclass
class History:
    step_noisy_loss: list[float] = field(default_factory=list)
    step_clean_loss: list[float] = field(default_factory=list)
    step_lr: list[float] = field(default_factory=list)
    epoch_noisy_loss: list[float] = field(default_factory=list)
    epoch_clean_loss: list[float] = field(default_factory=list)
    epoch_test_acc: list[float] = field(default_factory=list)
    main_steps: int = 0
    meta_updates: int = 0


@dataclass
class TrainResult:
    w: ParamVector
    alpha: ParamVector | None
    history: History
    model: MLCModel
    method: str


def _check_divergence(loss, history):
    if not math.isfinite(loss) or loss > 1e6:
        raise TrainingDiverged(f"training diverged: loss={loss!r} at step {history.main_steps}", history)


def train(
    data: TrainingData,
    classifier_config: ClassifierConfig,
    train_config: TrainConfig,
    method: str = "mlc",
    lcn_config: LcnConfig | None = None,
) -> TrainResult:
    """Train ``method`` on ``data``.

    ``mlc`` runs the full bi-level loop; the baselines share the same main
    step with the LCN switched off and a different data feed:

    * ``noisy_only``: noisy batches with their given labels;
    * ``clean_plus_noisy``: noisy batches plus a full clean batch;
    * ``clean_only``: clean batches only.

    Every method takes ``ceil(|noisy| / batch_size_noisy)`` steps per epoch.
    """
    if method not in METHODS:
        raise BilevelError(f"unknown method {method!r}; expected one of {METHODS}")
    cfg = train_config
    if len(data.clean) < 2 * cfg.batch_size_clean and method != "noisy_only":
        raise BilevelError(
            f"clean set of {len(data.clean)} rows is smaller than 2 x batch_size_clean ({cfg.batch_size_clean})"
        )
    use_lcn = method == "mlc"
    if use_lcn and lcn_config is None:
        lcn_config = LcnConfig(classifier_config.num_classes, classifier_config.feature_dim)
    model = MLCModel.from_configs(classifier_config, lcn_config if use_lcn else None)

    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    w = model.classifier.init_params(np.random.default_rng(seeds[0]))
    alpha = model.lcn.init_params(np.random.default_rng(seeds[1])) if use_lcn else None
    clean_stream = (
        CyclingBatches(data.clean, cfg.batch_size_clean, int(seeds[2].generate_state(1)[0]))
        if len(data.clean) >= 2
        else None
    )
    split_rng = np.random.default_rng(seeds[3])
    noisy_seed = cfg.seed

    w_opt = SGDMomentum(cfg.main_momentum)
    meta_opt = make_optimizer(cfg.meta_optimizer, cfg.meta_momentum) if use_lcn else None
    state = MetaGradState.fresh(alpha, w, cfg.main_lr) if use_lcn else None
    history = History()
    steps_per_epoch = math.ceil(len(data.noisy) / cfg.batch_size_noisy)

    for epoch in range(cfg.epochs):
        factor = cfg.lr_factor(epoch)
        lr, meta_lr = cfg.main_lr * factor, cfg.meta_lr * factor
        if use_lcn:
            state.lr_diag = w.full_like(lr)
        e_noisy, e_clean = [], []
        batches = batch_iter(data.noisy, cfg.batch_size_noisy, noisy_seed, epoch)
        for _ in range(steps_per_epoch):
            noisy_batch = next(batches)
            clean_batch = clean_stream.next() if clean_stream is not None else None
            if method == "mlc":
                eval_half, train_half = split_clean_batch(clean_batch, split_rng)
                step = main_step(model, w, alpha, noisy_batch, train_half, w_opt, lr)
                clean_loss, g_wp = meta_loss_grad(model, step.w_new, eval_half)
                hvp = mixed_hvp_fd(
                    model, alpha, w, noisy_batch, train_half, state.lr_diag * g_wp,
                    cfg.fd_epsilon_scale, features=step.features,
                )
                if cfg.carry_direction == "clean" and state.steps_since_meta_update > 0:
                    carry_dir = meta_loss_grad(model, w, eval_half)[1]
                else:
                    carry_dir = step.g_w
                accumulate_meta_grad(state, carry_dir, g_wp, hvp)
                w = step.w_new
                if state.steps_since_meta_update == cfg.k:
                    alpha = meta_step(alpha, state, meta_opt, meta_lr, cfg.k)
                    history.meta_updates += 1
            else:
                feed = {
                    "noisy_only": (noisy_batch, None),
                    "clean_plus_noisy": (noisy_batch, clean_batch),
                    "clean_only": (None, clean_batch),
                }[method]
                step = main_step(model, w, None, *feed, w_opt, lr)
                w = step.w_new
                clean_loss = meta_loss_grad(model, w, clean_batch)[0] if clean_batch is not None else float("nan")
            history.main_steps += 1
            _check_divergence(step.loss, history)
            history.step_noisy_loss.append(step.noisy_loss)
            history.step_clean_loss.append(clean_loss)
            history.step_lr.append(lr)
            e_noisy.append(step.noisy_loss)
            e_clean.append(clean_loss)
            if cfg.max_steps is not None and history.main_steps >= cfg.max_steps:
                break
        history.epoch_noisy_loss.append(float(np.mean(e_noisy)))
        history.epoch_clean_loss.append(float(np.mean(e_clean)))
        history.epoch_test_acc.append(evaluate(model.classifier, w, data.test).accuracy if len(data.test) else float("nan"))
        log.info(
            "%s epoch %d: noisy_loss=%.4f clean_loss=%.4f test_acc=%.4f",
            method, epoch, history.epoch_noisy_loss[-1], history.epoch_clean_loss[-1], history.epoch_test_acc[-1],
        )
        if cfg.max_steps is not None and history.main_steps >= cfg.max_steps:
            break
    return TrainResult(w, alpha, history, model, method)


def train_mlc(data: TrainingData, classifier_config, lcn_config, train_config) -> TrainResult:
    return train(data, classifier_config, train_config, "mlc", lcn_config)


def lcn_corrections(result: TrainResult, x, noisy_labels) -> np.ndarray:
    """Corrected label distributions for arbitrary (x, noisy label) pairs."""
    if result.alpha is None:
        raise BilevelError(f"method {result.method!r} has no label correction network")
    graph = Graph()
    _, feats = result.model.classifier.forward(graph, x, result.w, CLS)
    return result.model.lcn.forward(graph, feats, noisy_labels, result.alpha, LCN).value
