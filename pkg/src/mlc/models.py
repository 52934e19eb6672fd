"""Main classifier, label correction network, and the soft-target loss."""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .diffcore import Graph, Node, ParamVector


class ModelConfigError(ValueError):
    pass


class LabelRangeError(ValueError):
    def __init__(self, bad_label, num_classes):
        self.bad_label = int(bad_label)
        self.num_classes = int(num_classes)
        super().__init__(f"label {self.bad_label} outside [0, {self.num_classes})")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass(frozen=True)
class ClassifierConfig:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    # "post" feeds tanh activations of the last hidden layer to the LCN, "pre" the affine output
    feature_source: str = "post"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.num_classes < 1 or not self.hidden_dims:
            raise ModelConfigError(f"invalid classifier config: {self}")
        if any(h < 1 for h in self.hidden_dims):
            raise ModelConfigError(f"hidden dims must be >= 1: {self.hidden_dims}")
        if self.feature_source not in ("post", "pre"):
            raise ModelConfigError(f"feature_source must be 'post' or 'pre', got {self.feature_source!r}")

    @property
    def feature_dim(self) -> int:
        return self.hidden_dims[-1]


@dataclass(frozen=True)
class LcnConfig:
    num_classes: int
    feature_dim: int
    hidden_dim: int = 64
    label_embed_dim: int = 128

    def __post_init__(self):
        if min(self.num_classes, self.feature_dim, self.hidden_dim, self.label_embed_dim) < 1:
            raise ModelConfigError(f"invalid LCN config: {self}")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        h = self.hidden_dim
        return [(self.label_embed_dim + self.feature_dim, h), (h, h), (h, self.num_classes)]


class Classifier:
    """tanh MLP ``f_w``. Returns logits and the last hidden representation."""

    def __init__(self, config: ClassifierConfig):
        self.config = config
        dims = [config.input_dim, *config.hidden_dims]
        self._layers = [(f"fc{i}", dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        self._layers.append(("out", dims[-1], config.num_classes))

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        segs = {}
        for name, fan_in, fan_out in self._layers:
            segs[f"{name}.W"] = glorot_uniform(rng, fan_in, fan_out)
            segs[f"{name}.b"] = np.zeros(fan_out)
        return ParamVector(segs)

    def forward(self, graph: Graph, x, w: ParamVector | dict, prefix: str = "cls.") -> tuple[Node, Node]:
        """Build logits ``[batch, C]`` and features ``[batch, xdim]`` in ``graph``.

        ``w`` is either a ParamVector (bound here under ``prefix``) or a dict of
        already-bound nodes.
        """
        if not isinstance(x, Node):
            x = np.asarray(x, dtype=np.float64)
            if x.ndim != 2 or x.shape[1] != self.config.input_dim:
                raise dc.ShapeError("classifier_forward", x.shape, (None, self.config.input_dim))
            x = graph.constant(x, name="x")
        p = graph.bind(w, prefix) if isinstance(w, ParamVector) else w
        h = x
        features = None
        for name, _, _ in self._layers[:-1]:
            pre = dc.bias_add(dc.matmul(h, p[f"{name}.W"]), p[f"{name}.b"])
            h = dc.tanh(pre)
            features = h if self.config.feature_source == "post" else pre
        logits = dc.bias_add(dc.matmul(h, p["out.W"]), p["out.b"])
        return logits, features


class LabelCorrectionNet:
    """``g_alpha(h(x), y')``: label embedding concatenated with detached features,
    three affine layers with tanh in between, softmax output."""

    def __init__(self, config: LcnConfig):
        self.config = config

    def init_params(self, rng: np.random.Generator) -> ParamVector:
        cfg = self.config
        segs = {"embed": rng.normal(0.0, 0.01, size=(cfg.num_classes, cfg.label_embed_dim))}
        for i, (fan_in, fan_out) in enumerate(cfg.layer_shapes):
            segs[f"fc{i}.W"] = glorot_uniform(rng, fan_in, fan_out)
            segs[f"fc{i}.b"] = np.zeros(fan_out)
        return ParamVector(segs)

    def forward(self, graph: Graph, features, noisy_labels, alpha: ParamVector | dict, prefix: str = "lcn.") -> Node:
        cfg = self.config
        labels = np.asarray(noisy_labels)
        if labels.ndim != 1:
            raise dc.ShapeError("lcn_forward(labels)", labels.shape)
        bad = (labels < 0) | (labels >= cfg.num_classes)
        if np.any(bad):
            raise LabelRangeError(labels[bad][0], cfg.num_classes)
        if not isinstance(features, Node):
            features = graph.constant(features, name="features")
        if features.value.ndim != 2 or features.shape != (labels.shape[0], cfg.feature_dim):
            raise dc.ShapeError("lcn_forward(features)", features.shape, (labels.shape[0], cfg.feature_dim))
        if features.id not in graph.barriers:
            features = dc.stop_gradient(features)
        p = graph.bind(alpha, prefix) if isinstance(alpha, ParamVector) else alpha
        emb = dc.embedding(p["embed"], graph.index_constant(labels, name="y_noisy"))
        h = dc.concat([emb, features], axis=1)
        h = dc.tanh(dc.bias_add(dc.matmul(h, p["fc0.W"]), p["fc0.b"]))
        h = dc.tanh(dc.bias_add(dc.matmul(h, p["fc1.W"]), p["fc1.b"]))
        return dc.softmax(dc.bias_add(dc.matmul(h, p["fc2.W"]), p["fc2.b"]))


def soft_cross_entropy_per_example(target, logits: Node) -> Node:
    """``-sum_c target[c] * log_softmax(logits)[c]`` for each row."""
    graph = logits.graph
    if not isinstance(target, Node):
        target = graph.constant(target, name="target")
    if target.shape != logits.shape:
        raise dc.ShapeError("soft_cross_entropy", target.shape, logits.shape)
    return dc.neg(dc.row_sum(dc.mul(target, dc.log_softmax(logits))))


def soft_cross_entropy(target, logits: Node) -> Node:
    """Batch mean of the soft-target cross-entropy; a scalar node."""
    return dc.mean(soft_cross_entropy_per_example(target, logits))


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


# Parameter files: 8-byte magic, uint32 format version, uint32 header length,
# UTF-8 JSON header {"config": ..., "segments": [{"name", "shape"}, ...]},
# then every segment as little-endian float64 in header order.
PARAM_MAGIC = b"MLCPARAM"
PARAM_FORMAT_VERSION = 1


class ParamFileError(ValueError):
    pass


def save_params(path, params: ParamVector, config: dict | None = None) -> None:
    header = {
        "config": config or {},
        "segments": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(PARAM_MAGIC)
        fh.write(struct.pack("<II", PARAM_FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(params.flat().astype("<f8").tobytes())
    tmp.replace(path)


def load_params(path) -> tuple[ParamVector, dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != PARAM_MAGIC:
        raise ParamFileError(f"{path}: not a parameter file (bad magic)")
    version, hlen = struct.unpack("<II", raw[8:16])
    if version != PARAM_FORMAT_VERSION:
        raise ParamFileError(f"{path}: unsupported format version {version}")
    header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    flat = np.frombuffer(raw[16 + hlen :], dtype="<f8").astype(np.float64)
    template = ParamVector({s["name"]: np.zeros(s["shape"]) for s in header["segments"]})
    if flat.size != template.total_len:
        raise ParamFileError(f"{path}: expected {template.total_len} values, found {flat.size}")
    return template.unflatten(flat), header["config"]


def config_dict(cfg) -> dict:
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
