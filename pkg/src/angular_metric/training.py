"""A small deterministic embedding trainer.

Input feature vectors go through an encoder (identity, linear, or one
hidden ReLU layer, optionally followed by L2 normalization).  The trainer
optimizes any of the implemented losses with plain fixed-rate gradient
descent.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from ._linalg import l2_normalize, l2_normalize_backward
from .errors import InvalidInputError, NumericalError, ParseError
from .geometry import Triplet, check_alpha
from .sampling import (
    LabeledDataset,
    make_rng,
    sample_disjoint_triplet_indices,
    sample_npair_batch,
)

__all__ = [
    "EncoderModel", "ForwardCache", "TrainConfig", "LOSS_KINDS",
    "l2_normalize", "init_encoder", "encoder_forward", "encoder_backward",
    "embed", "train", "generate_synthetic", "save_model", "load_model",
    "format_model", "parse_model",
]

ENCODER_KINDS = ("identity", "linear", "mlp")

LOSS_KINDS = ("triplet-disjoint", "triplet-npair-sampled", "angular", "npair", "npair-angular")
LOSS_ALIASES = {"triplet": "triplet-disjoint", "triplet-npair": "triplet-npair-sampled",
                "npair&angular": "npair-angular", "combined": "npair-angular"}
ANGULAR_LOSSES = ("angular", "npair-angular")


def canonical_loss(name):
    name = LOSS_ALIASES.get(name, name)
    if name not in LOSS_KINDS:
        raise InvalidInputError(f"unknown loss {name!r}; choose from {', '.join(LOSS_KINDS)}")
    return name


def param_shapes(kind, input_dim, embed_dim, hidden_dim=0):
    if kind == "identity":
        if input_dim != embed_dim:
            raise InvalidInputError("identity encoder needs input_dim == embed_dim")
        return []
    if kind == "linear":
        return [(input_dim, embed_dim), (embed_dim,)]
    if kind != "mlp":
        raise InvalidInputError(f"unknown encoder kind {kind!r}")
    if hidden_dim < 1:
        raise InvalidInputError("mlp encoder needs hidden_dim >= 1")
    return [(input_dim, hidden_dim), (hidden_dim,), (hidden_dim, embed_dim), (embed_dim,)]


@dataclass
class EncoderModel:
    kind: str
    input_dim: int
    embed_dim: int
    params: list = field(default_factory=list)
    normalize_output: bool = False
    hidden_dim: int = 0
    # bumped on every parameter update so stale forward caches are detected
    version: int = 0

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise InvalidInputError(f"unknown encoder kind {self.kind!r}")
        self.params = [np.asarray(p, dtype=np.float64) for p in self.params]
        shapes = [p.shape for p in self.params]
        if shapes != self.expected_shapes():
            raise InvalidInputError(f"parameter shapes {shapes} do not match {self.expected_shapes()}")

    def expected_shapes(self):
        return param_shapes(self.kind, self.input_dim, self.embed_dim, self.hidden_dim)

    def apply_update(self, grads, learning_rate):
        for p, g in zip(self.params, grads):
            p -= learning_rate * g
        self.version += 1

    def copy(self):
        return replace(self, params=[p.copy() for p in self.params])


@dataclass
class ForwardCache:
    inputs: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    raw: np.ndarray
    model_id: int
    version: int


def init_encoder(kind, input_dim, embed_dim, rng, hidden_dim=0, normalize_output=False):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    rng = make_rng(rng)
    if kind == "identity":
        return EncoderModel(kind, input_dim, embed_dim, [], normalize_output)
    params = []
    fan_in = input_dim
    for shape in param_shapes(kind, input_dim, embed_dim, hidden_dim):
        bound = 1.0 / math.sqrt(fan_in)
        params.append(rng.uniform(-bound, bound, size=shape))
        if len(shape) == 1:
            fan_in = shape[0]
    return EncoderModel(kind, input_dim, embed_dim, params, normalize_output, hidden_dim)


def encoder_forward(model: EncoderModel, x_batch):
    X = np.asarray(x_batch, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise InvalidInputError(f"expected inputs of shape (n, {model.input_dim}), got {X.shape}")
    hidden_pre = hidden = None
    if model.kind == "identity":
        Z = X.copy()
    elif model.kind == "linear":
        W, b = model.params
        Z = X @ W + b
    else:
        W1, b1, W2, b2 = model.params
        hidden_pre = X @ W1 + b1
        hidden = np.maximum(hidden_pre, 0.0)
        Z = hidden @ W2 + b2
    out = l2_normalize(Z) if model.normalize_output else Z
    return out, ForwardCache(X, hidden_pre, hidden, Z, id(model), model.version)


def encoder_backward(model: EncoderModel, cache: ForwardCache, grad_embeddings):
    """Return ``(param_grads, input_grads)`` for upstream ``grad_embeddings``."""
    if cache.model_id != id(model) or cache.version != model.version:
        raise InvalidInputError("forward cache does not belong to the current model state")
    G = np.asarray(grad_embeddings, dtype=np.float64)
    if G.shape != cache.raw.shape:
        raise InvalidInputError(f"gradient shape {G.shape} != embedding shape {cache.raw.shape}")
    if model.normalize_output:
        G = l2_normalize_backward(cache.raw, G)
    if model.kind == "identity":
        return [], G
    if model.kind == "linear":
        W, _ = model.params
        return [cache.inputs.T @ G, G.sum(axis=0)], G @ W.T
    W1, _, W2, _ = model.params
    gW2 = cache.hidden.T @ G
    gb2 = G.sum(axis=0)
    gH = (G @ W2.T) * (cache.hidden_pre > 0.0)
    return [cache.inputs.T @ gH, gH.sum(axis=0), gW2, gb2], gH @ W1.T


def embed(model: EncoderModel, vectors):
    return encoder_forward(model, vectors)[0]


@dataclass
class TrainConfig:
    loss: str = "npair-angular"
    alpha_degrees: float = None
    margin: float = losses.DEFAULT_MARGIN
    lam: float = losses.DEFAULT_LAMBDA
    batch_size: int = 32
    iterations: int = 2000
    learning_rate: float = 0.05
    seed: int = 0
    encoder: str = "linear"
    embed_dim: int = 16
    hidden_dim: int = 64
    normalize_output: bool = True

    def __post_init__(self):
        self.loss = canonical_loss(self.loss)
        if self.loss in ANGULAR_LOSSES and self.alpha_degrees is None:
            raise InvalidInputError(f"loss {self.loss!r} requires alpha_degrees")
        if self.alpha_degrees is not None:
            self.alpha_degrees = check_alpha(self.alpha_degrees)
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if not self.learning_rate > 0.0:
            raise InvalidInputError("learning_rate must be > 0")
        if self.loss == "triplet-disjoint":
            if self.batch_size < 3:
                raise InvalidInputError("disjoint-triplet batches need batch_size >= 3")
        elif self.batch_size % 2 or self.batch_size < 4:
            raise InvalidInputError("N-pair batches need an even batch_size >= 4")
        if self.encoder not in ENCODER_KINDS:
            raise InvalidInputError(f"unknown encoder {self.encoder!r}")

    @property
    def angular_params(self):
        if self.alpha_degrees is None:
            return None
        return losses.AngularParams(self.alpha_degrees)


def batch_objective(config: TrainConfig, embeddings, batch):
    """Loss value and embedding gradients for one sampled batch.

    ``batch`` is an :class:`NPairBatch` for N-pair-sampled losses; for
    disjoint triplets it is unused and ``embeddings`` holds 3 rows per triplet.
    """
    kind = config.loss
    if kind == "triplet-disjoint":
        t = embeddings.shape[0] // 3
        trips = [Triplet(*embeddings[3 * i:3 * i + 3]) for i in range(t)]
        res = losses.triplet_loss_mean(trips, config.margin)
        return res.value, res.gradients.reshape(embeddings.shape)
    b = batch.with_vectors(embeddings)
    if kind == "triplet-npair-sampled":
        res = losses.triplet_loss_batch(b, config.margin)
    elif kind == "angular":
        res = losses.angular_loss_batch(b, config.angular_params)
    elif kind == "npair":
        res = losses.npair_loss_batch(b)
    else:
        res = losses.combined_loss_batch(b, config.angular_params, config.lam)
    return res.value, res.gradients


def _sample(config, data, rng):
    """Dataset positions of the batch rows and the batch structure."""
    if config.loss == "triplet-disjoint":
        _, idx = sample_disjoint_triplet_indices(data, config.batch_size // 3, rng)
        return idx.reshape(-1), None
    batch = sample_npair_batch(data, config.batch_size, rng)
    return np.array(batch.pairs, dtype=np.int64).reshape(-1), batch


def train(data: LabeledDataset, config: TrainConfig, log_every=0, log=None):
    """Run ``config.iterations`` gradient-descent steps.

    Returns ``(model, history)`` where ``history[i]`` is the batch loss
    measured before update ``i``.
    """
    rng = make_rng(config.seed)
    embed_dim = data.dim if config.encoder == "identity" else config.embed_dim
    model = init_encoder(config.encoder, data.dim, embed_dim, rng,
                         hidden_dim=config.hidden_dim if config.encoder == "mlp" else 0,
                         normalize_output=config.normalize_output)
    history = np.empty(config.iterations)
    for it in range(config.iterations):
        rows, batch = _sample(config, data, rng)
        emb, cache = encoder_forward(model, data.vectors[rows])
        try:
            value, grad_emb = batch_objective(config, emb, batch)
        except NumericalError as exc:
            raise NumericalError(f"iteration {it}: {exc}") from exc
        if not math.isfinite(value):
            raise NumericalError(f"iteration {it}: non-finite loss {value}")
        history[it] = value
        grads, _ = encoder_backward(model, cache, grad_emb)
        if any(not np.all(np.isfinite(g)) for g in grads):
            raise NumericalError(f"iteration {it}: non-finite parameter gradient")
        model.apply_update(grads, config.learning_rate)
        if log is not None and log_every and (it + 1) % log_every == 0:
            log(f"iter {it + 1}/{config.iterations} loss {value:.6f}")
    return model, history


def generate_synthetic(classes, per_class, dim, center_scale=1.0, noise_sigma=0.1, seed=0,
                       signal_dim=None):
    """Gaussian class blobs: ``classes * per_class`` rows, labels ``0..classes-1``.

    Centers are ``center_scale * N(0, I)``.  With ``signal_dim < dim`` they
    are drawn in a random ``signal_dim``-dimensional subspace instead, so the
    remaining directions carry only noise (structure a learned encoder can
    exploit on classes it never saw).  Noise is always isotropic.
    """
    if classes < 2 or per_class < 2 or dim < 2:
        raise InvalidInputError("need classes >= 2, per_class >= 2 and dim >= 2")
    if not center_scale > 0.0:
        raise InvalidInputError("center_scale must be > 0")
    if not noise_sigma >= 0.0:
        raise InvalidInputError("noise_sigma must be >= 0")
    signal_dim = dim if signal_dim is None else int(signal_dim)
    if not 1 <= signal_dim <= dim:
        raise InvalidInputError(f"signal_dim must lie in [1, {dim}]")
    rng = make_rng(seed)
    centers = center_scale * rng.standard_normal((classes, signal_dim))
    if signal_dim < dim:
        basis, _ = np.linalg.qr(rng.standard_normal((dim, signal_dim)))
        centers = centers @ basis.T
    labels = np.repeat(np.arange(classes), per_class)
    noise = rng.standard_normal((classes * per_class, dim))
    return LabeledDataset(centers[labels] + noise_sigma * noise, labels)


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

MODEL_MAGIC = "angular-metric-model"


def _fmt(v):
    return format(float(v), ".17g")


def format_model(model: EncoderModel) -> str:
    lines = [f"{MODEL_MAGIC} kind={model.kind} input_dim={model.input_dim} "
             f"embed_dim={model.embed_dim} hidden_dim={model.hidden_dim} "
             f"normalize={int(model.normalize_output)}"]
    for p in model.params:
        for row in np.atleast_2d(p):
            lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> EncoderModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(MODEL_MAGIC):
        raise ParseError("not a model file (missing header)")
    try:
        fields = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        kind = fields["kind"]
        input_dim, embed_dim = int(fields["input_dim"]), int(fields["embed_dim"])
        hidden_dim = int(fields.get("hidden_dim", 0))
        normalize = fields["normalize"] not in ("0", "false")
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad model header: {lines[0]!r}") from exc
    try:
        shapes = param_shapes(kind, input_dim, embed_dim, hidden_dim)
    except InvalidInputError as exc:
        raise ParseError(str(exc)) from exc
    body = lines[1:]
    params = []
    pos = 0
    try:
        for shape in shapes:
            nrows = shape[0] if len(shape) == 2 else 1
            rows = [[float(v) for v in ln.split()] for ln in body[pos:pos + nrows]]
            pos += nrows
            arr = np.array(rows, dtype=np.float64)
            params.append(arr.reshape(shape))
    except ValueError as exc:
        raise ParseError(f"bad parameter block: {exc}") from exc
    if pos != len(body):
        raise ParseError("trailing data after the last parameter block")
    return EncoderModel(kind, input_dim, embed_dim, params, normalize, hidden_dim)


def save_model(model, path):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_model(model))


def load_model(path):
    with open(path, encoding="ascii") as fh:
        return parse_model(fh.read())
