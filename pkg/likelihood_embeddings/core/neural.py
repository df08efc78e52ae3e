"""Learned likelihood-preserving embeddings

A small multilayer perceptron with hand-written backpropagation through mean
aggregation and the [theta; z] concatenation, trained with Adam on either the
pointwise objective or the likelihood-ratio pair objective.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from ..utils.file_utils import write_json
from ..utils.rng import derive_seed, make_rng
from .embeddings import Decoder, DatasetEmbedding, PerSampleEncoder
from .errors import DegenerateError, ShapeError, TrainingDivergedError, WeightsFormatError
from .metrics import ThetaGrid, audit, check_pointwise_to_ratio
from .models import (
    Dataset,
    ModelFamily,
    ParamVector,
    ThetaLike,
    as_param_vector,
    log_likelihood,
    log_likelihood_grid,
    sample,
)

logger = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "relu")
OBJECTIVES = ("pointwise", "lr_pair")
WEIGHTS_FORMAT = "likelihood-embeddings/mlp-pair"


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """
    Layers of (W, b) with W of shape (out, in)

    The activation is applied after every layer except the last.
    """

    layers: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not self.layers:
            raise ShapeError("an MLP needs at least one layer")
        layers = []
        for i, (W, b) in enumerate(self.layers):
            W = np.array(W, dtype=float)
            b = np.array(b, dtype=float)
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {i}: weight {W.shape} and bias {b.shape} do not match")
            if layers and W.shape[1] != layers[-1][0].shape[0]:
                raise ShapeError(f"layer {i}: input dim {W.shape[1]} does not chain with {layers[-1][0].shape[0]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ShapeError(f"layer {i}: non-finite entries")
            W.setflags(write=False)
            b.setflags(write=False)
            layers.append((W, b))
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.input_dim,) + tuple(W.shape[0] for W, _ in self.layers)

    def arrays(self) -> List[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]"""
        return [a for layer in self.layers for a in layer]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpWeights":
        if len(arrays) != 2 * len(self.layers):
            raise ShapeError(f"expected {2 * len(self.layers)} arrays, got {len(arrays)}")
        return MlpWeights(tuple((arrays[2 * i], arrays[2 * i + 1]) for i in range(len(self.layers))), self.activation)


def init_mlp(sizes: Sequence[int], activation: str, rng: np.random.Generator) -> MlpWeights:
    """Glorot-uniform weights, zero biases"""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        layers.append((rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return MlpWeights(tuple(layers), activation)


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(pre)
    return np.maximum(pre, 0.0)


def _activate_grad(pre: np.ndarray, post: np.ndarray, activation: str) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - post * post
    return (pre > 0.0).astype(float)


def _forward(w: MlpWeights, X: np.ndarray):
    acts = [X]
    pres = []
    h = X
    last = len(w.layers) - 1
    for i, (W, b) in enumerate(w.layers):
        pre = h @ W.T + b
        pres.append(pre)
        h = _activate(pre, w.activation) if i < last else pre
        acts.append(h)
    return h, (acts, pres)


def _backward(w: MlpWeights, cache, grad_out: np.ndarray):
    """Gradients of every (W, b) and of the input, given dLoss/dOutput"""
    acts, pres = cache
    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(w.layers)  # type: ignore[list-item]
    g = grad_out
    last = len(w.layers) - 1
    for i in range(last, -1, -1):
        if i < last:
            g = g * _activate_grad(pres[i], acts[i + 1], w.activation)
        W, _ = w.layers[i]
        grads[i] = (g.T @ acts[i], g.sum(axis=0))
        g = g @ W
    return grads, g


def mlp_forward(w: MlpWeights, x) -> np.ndarray:
    """
    Forward pass for one input vector or a batch of rows

    Args:
        w: Network weights
        x: Vector of length input_dim or an N x input_dim matrix

    Returns:
        Output vector (or N x output_dim matrix)
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.ndim != 2 or X.shape[1] != w.input_dim:
        raise ShapeError(f"MLP expects inputs of dimension {w.input_dim}, got shape {x.shape}")
    out, _ = _forward(w, X)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class PairScaling:
    """
    Fixed affine maps around the networks

    Data rows and theta are z-scored before entering the encoder and the
    decoder; the decoder output is mapped back with output_shift + output_scale * o.
    None of these values are trained.
    """

    data_shift: np.ndarray
    data_scale: np.ndarray
    theta_shift: np.ndarray
    theta_scale: np.ndarray
    output_shift: float = 0.0
    output_scale: float = 1.0

    def __post_init__(self):
        for name in ("data_shift", "data_scale", "theta_shift", "theta_scale"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} must be a finite vector, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.data_shift.shape != self.data_scale.shape or self.theta_shift.shape != self.theta_scale.shape:
            raise ShapeError("shift and scale vectors must have matching lengths")
        if np.any(self.data_scale <= 0) or np.any(self.theta_scale <= 0):
            raise ShapeError("scales must be positive")
        object.__setattr__(self, "output_shift", float(self.output_shift))
        object.__setattr__(self, "output_scale", float(self.output_scale))
        if not (math.isfinite(self.output_shift) and math.isfinite(self.output_scale) and self.output_scale > 0):
            raise ShapeError(f"output map {self.output_shift} + {self.output_scale} * o is not usable")

    @classmethod
    def identity(cls, data_dim: int, param_dim: int) -> "PairScaling":
        return cls(np.zeros(data_dim), np.ones(data_dim), np.zeros(param_dim), np.ones(param_dim))

    def scale_rows(self, rows: np.ndarray) -> np.ndarray:
        return (rows - self.data_shift) / self.data_scale

    def scale_thetas(self, thetas: np.ndarray) -> np.ndarray:
        return (thetas - self.theta_shift) / self.theta_scale

    def unscale_output(self, out: np.ndarray) -> np.ndarray:
        return self.output_shift + self.output_scale * out


def _spread(values: np.ndarray) -> np.ndarray:
    sd = np.asarray(values, dtype=float).std(axis=0)
    return np.where(sd > 0, sd, 1.0)


@dataclass(frozen=True, eq=False)
class EncoderDecoderPair:
    """Encoder d -> ... -> m and decoder (p + m) -> ... -> 1 consuming [theta; z]"""

    encoder: MlpWeights
    decoder: MlpWeights
    scaling: Optional[PairScaling] = None

    def __post_init__(self):
        if self.decoder.output_dim != 1:
            raise ShapeError(f"decoder must output a scalar, got {self.decoder.output_dim}")
        if self.decoder.input_dim <= self.encoder.output_dim:
            raise ShapeError("decoder input must hold theta and the embedding")
        if self.scaling is None:
            object.__setattr__(self, "scaling", PairScaling.identity(self.data_dim, self.param_dim))
        elif self.scaling.data_shift.shape != (self.data_dim,) or self.scaling.theta_shift.shape != (self.param_dim,):
            raise ShapeError(
                f"scaling covers d={self.scaling.data_shift.shape[0]}, p={self.scaling.theta_shift.shape[0]}; "
                f"pair has d={self.data_dim}, p={self.param_dim}"
            )

    @property
    def data_dim(self) -> int:
        return self.encoder.input_dim

    @property
    def embed_dim(self) -> int:
        return self.encoder.output_dim

    @property
    def param_dim(self) -> int:
        return self.decoder.input_dim - self.encoder.output_dim

    def check_family(self, family: ModelFamily) -> None:
        if family.data_dim != self.data_dim or family.param_dim != self.param_dim:
            raise ShapeError(
                f"{family.name}: pair expects d={self.data_dim}, p={self.param_dim}; "
                f"family has d={family.data_dim}, p={family.param_dim}"
            )

    def arrays(self) -> List[np.ndarray]:
        return self.encoder.arrays() + self.decoder.arrays()

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "EncoderDecoderPair":
        split = 2 * len(self.encoder.layers)
        return EncoderDecoderPair(
            self.encoder.with_arrays(arrays[:split]), self.decoder.with_arrays(arrays[split:]), self.scaling
        )

    def with_scaling(self, scaling: PairScaling) -> "EncoderDecoderPair":
        return EncoderDecoderPair(self.encoder, self.decoder, scaling)

    def encode_rows(self, rows: np.ndarray) -> np.ndarray:
        """Per-row encoder outputs"""
        return mlp_forward(self.encoder, self.scaling.scale_rows(np.atleast_2d(np.asarray(rows, dtype=float))))

    def embed(self, rows: np.ndarray) -> np.ndarray:
        """Mean of the encoder outputs over the rows"""
        return self.encode_rows(rows).mean(axis=0)

    def decode(self, thetas, s: np.ndarray) -> np.ndarray:
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        s = np.asarray(s, dtype=float)
        inputs = np.hstack([self.scaling.scale_thetas(thetas), np.tile(s, (thetas.shape[0], 1))])
        return self.scaling.unscale_output(mlp_forward(self.decoder, inputs)[:, 0])

    def as_encoder(self) -> "LearnedEncoder":
        return LearnedEncoder(self)

    def as_decoder(self) -> "LearnedDecoder":
        return LearnedDecoder(self)


def init_pair(
    param_dim: int,
    data_dim: int,
    embed_dim: int,
    rng: np.random.Generator,
    encoder_hidden: Sequence[int] = (64, 64),
    decoder_hidden: Sequence[int] = (128, 64),
    activation: str = "tanh",
) -> EncoderDecoderPair:
    encoder = init_mlp([data_dim, *encoder_hidden, embed_dim], activation, rng)
    decoder = init_mlp([param_dim + embed_dim, *decoder_hidden, 1], activation, rng)
    return EncoderDecoderPair(encoder, decoder)


class LearnedEncoder(PerSampleEncoder):
    """Encoder half of a trained pair, usable wherever an Encoder is expected"""

    name = "learned"

    def __init__(self, pair: EncoderDecoderPair):
        super().__init__(pair.embed_dim)
        self.pair = pair

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return self.pair.encode_rows(rows)


class LearnedDecoder(Decoder):
    """Decoder half of a trained pair"""

    name = "learned"

    def __init__(self, pair: EncoderDecoderPair):
        self.pair = pair

    def evaluate(self, thetas: np.ndarray, embedding: DatasetEmbedding) -> np.ndarray:
        return self.pair.decode(thetas, embedding.s)


def _loss_and_grads(
    pair: EncoderDecoderPair,
    rows: np.ndarray,
    thetas: np.ndarray,
    true_ll: np.ndarray,
    objective: str,
) -> Tuple[float, List[np.ndarray]]:
    """
    Mean loss over a batch of cases sharing one dataset, and its gradient

    Pointwise cases are the rows of thetas; lr_pair cases are consecutive
    row pairs (0, 1), (2, 3), ...
    """
    scaling = pair.scaling
    n = rows.shape[0]
    k, p = thetas.shape
    Z, enc_cache = _forward(pair.encoder, scaling.scale_rows(rows))
    s = Z.mean(axis=0)
    inputs = np.hstack([scaling.scale_thetas(thetas), np.tile(s, (k, 1))])
    H, dec_cache = _forward(pair.decoder, inputs)
    h = scaling.unscale_output(H[:, 0])

    if objective == "pointwise":
        resid = true_ll / n - h
        loss = float(np.mean(resid * resid))
        grad_h = -2.0 * resid / k
    elif objective == "lr_pair":
        if k % 2:
            raise ShapeError(f"lr_pair cases come in pairs, got {k} thetas")
        diff = (true_ll[0::2] - true_ll[1::2]) - n * (h[0::2] - h[1::2])
        loss = float(np.mean(diff * diff))
        grad_h = np.empty(k)
        grad_h[0::2] = -2.0 * diff * n / (k // 2)
        grad_h[1::2] = 2.0 * diff * n / (k // 2)
    else:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")

    dec_grads, grad_inputs = _backward(pair.decoder, dec_cache, (grad_h * scaling.output_scale)[:, None])
    grad_s = grad_inputs[:, p:].sum(axis=0)
    # mean aggregation spreads dS evenly over the rows
    enc_grads, _ = _backward(pair.encoder, enc_cache, np.tile(grad_s / n, (n, 1)))
    flat = [a for layer in enc_grads for a in layer] + [a for layer in dec_grads for a in layer]
    return float(loss), flat


def _case_thetas(family: ModelFamily, theta: ThetaLike, theta_prime: Optional[ThetaLike], objective: str) -> np.ndarray:
    if objective == "lr_pair":
        if theta_prime is None:
            raise ValueError("lr_pair objective needs theta_prime")
        return family.check_thetas([as_param_vector(theta), as_param_vector(theta_prime)])
    return family.check_thetas(as_param_vector(theta).as_array())


def pointwise_loss(pair: EncoderDecoderPair, family: ModelFamily, theta: ThetaLike, data: Dataset) -> float:
    """((1/n) L_n(theta) - h(theta, S))^2"""
    pair.check_family(family)
    target = log_likelihood(family, data, theta) / data.n
    pred = pair.decode(as_param_vector(theta).as_array(), pair.embed(data.rows))[0]
    return float((target - pred) ** 2)


def lr_pair_loss(
    pair: EncoderDecoderPair,
    family: ModelFamily,
    theta: ThetaLike,
    theta_prime: ThetaLike,
    data: Dataset,
) -> float:
    """((L_n(theta) - L_n(theta')) - (L~_n(theta) - L~_n(theta')))^2"""
    pair.check_family(family)
    thetas = _case_thetas(family, theta, theta_prime, "lr_pair")
    true_ll = log_likelihood_grid(family, data, thetas)
    h = pair.decode(thetas, pair.embed(data.rows))
    diff = (true_ll[0] - true_ll[1]) - data.n * (h[0] - h[1])
    return float(diff * diff)


def backprop(
    pair: EncoderDecoderPair,
    family: ModelFamily,
    data: Dataset,
    theta: ThetaLike,
    theta_prime: Optional[ThetaLike] = None,
    objective: str = "pointwise",
) -> Tuple[float, EncoderDecoderPair]:
    """
    Loss and its gradient with respect to every weight and bias

    Args:
        pair: Current networks
        family: Model family supplying the exact likelihood
        data: Training dataset
        theta: Parameter value
        theta_prime: Second parameter value (lr_pair objective only)
        objective: "pointwise" or "lr_pair"

    Returns:
        Tuple of (loss, gradients laid out as an EncoderDecoderPair)
    """
    pair.check_family(family)
    thetas = _case_thetas(family, theta, theta_prime, objective)
    true_ll = log_likelihood_grid(family, data, thetas)
    loss, flat = _loss_and_grads(pair, data.rows, thetas, true_ll, objective)
    return loss, pair.with_arrays(flat)


class AdamOptimizer:
    """Adam over a flat list of parameter arrays"""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p, dtype=float) for p in params]
        self.v = [np.zeros_like(p, dtype=float) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Return updated parameters; the moment estimates are advanced in place"""
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        updated = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            updated.append(p - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))
        return updated


@dataclass(frozen=True)
class TrainConfig:
    """Training hyper-parameters; theta_pool is the support of the training distribution"""

    theta_pool: Tuple[ParamVector, ...]
    objective: str = "pointwise"
    iterations: int = 20000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n: int = 100
    seed: int = 0
    checkpoint_every: int = 1000
    embed_dim: int = 2
    encoder_hidden: Tuple[int, ...] = (64, 64)
    decoder_hidden: Tuple[int, ...] = (128, 64)
    activation: str = "tanh"
    theta_batch: int = 1
    heldout_n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "theta_pool", tuple(as_param_vector(t) for t in self.theta_pool))
        object.__setattr__(self, "encoder_hidden", tuple(int(h) for h in self.encoder_hidden))
        object.__setattr__(self, "decoder_hidden", tuple(int(h) for h in self.decoder_hidden))

    def validate(self) -> bool:
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.theta_pool:
            raise ValueError("theta_pool must not be empty")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.learning_rate <= 0 or self.checkpoint_every < 1 or self.theta_batch < 1 or self.n < 1:
            raise ValueError("learning_rate, checkpoint_every, theta_batch and n must be positive")
        return True


@dataclass(frozen=True)
class Checkpoint:
    iteration: int
    loss: float
    eps_heldout: float
    delta_heldout: float
    mle_gap_heldout: float
    bound_holds: bool


@dataclass
class TrainLog:
    """Per-checkpoint training trace"""

    checkpoints: List[Checkpoint] = field(default_factory=list)

    CSV_HEADER = ("iteration", "loss", "eps_heldout", "delta_heldout")

    def append(self, checkpoint: Checkpoint):
        if self.checkpoints and checkpoint.iteration <= self.checkpoints[-1].iteration:
            raise ValueError("checkpoint iterations must be strictly increasing")
        self.checkpoints.append(checkpoint)

    @property
    def losses(self) -> List[float]:
        return [cp.loss for cp in self.checkpoints]

    def csv_rows(self) -> List[Tuple[int, float, float, float]]:
        return [(cp.iteration, cp.loss, cp.eps_heldout, cp.delta_heldout) for cp in self.checkpoints]


def perturbation_pool(theta0: ThetaLike, size: int, scale: float, seed: int) -> Tuple[ParamVector, ...]:
    """theta0 + N(0, scale^2) per coordinate, drawn once"""
    base = as_param_vector(theta0).as_array()
    rng = make_rng(seed, "pool")
    return tuple(ParamVector(tuple(base + scale * rng.standard_normal(base.shape[0]))) for _ in range(size))


def fit_scaling(pair: EncoderDecoderPair, family: ModelFamily, data: Dataset, pool: np.ndarray) -> EncoderDecoderPair:
    """
    Attach z-scoring fitted on one dataset and the theta pool

    The output map is set so that the decoded values over the pool have the
    mean and the spread of the pointwise targets (1/n) L_n(theta).
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    scaling = PairScaling(data.rows.mean(axis=0), _spread(data.rows), pool.mean(axis=0), _spread(pool))
    staged = pair.with_scaling(scaling)
    targets = log_likelihood_grid(family, data, pool) / data.n
    raw = staged.decode(pool, staged.embed(data.rows))
    spread = float(targets.std())
    output_scale = spread if spread > 0 else 1.0
    output_shift = float(targets.mean()) - output_scale * float(raw.mean())
    return pair.with_scaling(replace(scaling, output_shift=output_shift, output_scale=output_scale))


def train(
    config: TrainConfig,
    family: ModelFamily,
    theta0: ThetaLike,
    progress_callback: Optional[Callable[[float, str], None]] = None,
) -> Tuple[EncoderDecoderPair, TrainLog]:
    """
    Train an encoder/decoder pair

    Each iteration draws theta_batch thetas (or theta pairs) uniformly from the
    pool and one fresh dataset from P_theta0, then takes one Adam step on the
    mean loss. Scaling is fitted on the first dataset before any step.
    Checkpoints audit the current pair on a held-out dataset over the pool grid.

    Args:
        config: Training configuration
        family: Model family
        theta0: Data-generating parameter
        progress_callback: Optional (fraction, description) callback

    Returns:
        Tuple of (trained pair, training log)
    """
    config.validate()
    theta0 = as_param_vector(theta0)
    pool = family.check_thetas(list(config.theta_pool))
    grid = ThetaGrid(config.theta_pool, f"training pool ({len(config.theta_pool)} points)")
    log = TrainLog()

    pair = init_pair(
        family.param_dim,
        family.data_dim,
        config.embed_dim,
        make_rng(config.seed, "init"),
        config.encoder_hidden,
        config.decoder_hidden,
        config.activation,
    )
    heldout = sample(family, theta0, config.heldout_n or config.n, derive_seed(config.seed, "heldout"))
    pair = fit_scaling(pair, family, sample(family, theta0, config.n, derive_seed(config.seed, "data", 0)), pool)

    theta_rng = make_rng(config.seed, "theta")
    optimizer = AdamOptimizer(pair.arrays(), config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    params = pair.arrays()
    width = 1 if config.objective == "pointwise" else 2
    running: List[float] = []
    logger.info("🚀 Training %s embedding (m=%d, %s) for %d iterations",
                family.name, config.embed_dim, config.objective, config.iterations)

    for it in range(1, config.iterations + 1):
        data = sample(family, theta0, config.n, derive_seed(config.seed, "data", it - 1))
        picks = theta_rng.integers(0, pool.shape[0], size=(config.theta_batch, width))
        thetas = pool[picks.ravel()]
        true_ll = log_likelihood_grid(family, data, thetas)
        loss, grads = _loss_and_grads(pair, data.rows, thetas, true_ll, config.objective)

        if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
            logger.error("❌ Training diverged at iteration %d (loss=%r)", it, loss)
            raise TrainingDivergedError(f"loss became non-finite at iteration {it}: {loss!r}", it, log)

        params = optimizer.step(params, grads)
        pair = pair.with_arrays(params)
        running.append(loss)

        if it % config.checkpoint_every == 0 or it == config.iterations:
            report = audit(family, heldout, pair.as_encoder(), pair.as_decoder(), grid)
            checkpoint = Checkpoint(
                iteration=it,
                loss=float(np.mean(running)),
                eps_heldout=report.epsilon_n,
                delta_heldout=report.delta_n,
                mle_gap_heldout=report.mle_gap_norm,
                bound_holds=check_pointwise_to_ratio(report),
            )
            log.append(checkpoint)
            running = []
            logger.info("iteration %d: loss=%.4g eps=%.4g delta=%.4g",
                        it, checkpoint.loss, checkpoint.eps_heldout, checkpoint.delta_heldout)
            if progress_callback:
                progress_callback(it / config.iterations, f"iteration {it}/{config.iterations}")

    return pair, log


def calibrate_linear(true_vals: Sequence[float], surrogate_vals: Sequence[float]) -> Tuple[float, float, float]:
    """
    Least-squares fit of true values on surrogate values

    Returns:
        Tuple of (slope, intercept, Pearson r)
    """
    x = np.asarray(surrogate_vals, dtype=float)
    y = np.asarray(true_vals, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"calibration inputs must be equal-length vectors, got {y.shape} and {x.shape}")
    if x.shape[0] < 3:
        raise DegenerateError("calibration needs at least 3 points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateError("calibration inputs must vary")
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept), float(fit.rvalue)


def _mlp_to_doc(w: MlpWeights) -> dict:
    return {
        "activation": w.activation,
        "layers": [
            {"shape": list(W.shape), "weights": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in w.layers
        ],
    }


def _mlp_from_doc(doc, part: str) -> MlpWeights:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise WeightsFormatError(f"{part}: missing 'layers'")
    layers = []
    for i, layer in enumerate(doc["layers"]):
        try:
            rows, cols = (int(v) for v in layer["shape"])
            W = np.array(layer["weights"], dtype=float).reshape(rows, cols)
            b = np.array(layer["bias"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise WeightsFormatError(f"{part}: {e}", layer_index=i) from e
        if b.shape != (rows,):
            raise WeightsFormatError(f"{part}: bias has {b.shape[0] if b.ndim else 0} entries, expected {rows}", i)
        layers.append((W, b))
    try:
        return MlpWeights(tuple(layers), doc.get("activation", "tanh"))
    except (ShapeError, ValueError) as e:
        raise WeightsFormatError(f"{part}: {e}") from e


def save_weights(pair: EncoderDecoderPair, path: Union[str, Path]) -> Path:
    """Write the pair as JSON with per-layer shapes and row-major values"""
    doc = {
        "format": WEIGHTS_FORMAT,
        "encoder": _mlp_to_doc(pair.encoder),
        "decoder": _mlp_to_doc(pair.decoder),
        "scaling": {
            "data_shift": pair.scaling.data_shift.tolist(),
            "data_scale": pair.scaling.data_scale.tolist(),
            "theta_shift": pair.scaling.theta_shift.tolist(),
            "theta_scale": pair.scaling.theta_scale.tolist(),
            "output_shift": pair.scaling.output_shift,
            "output_scale": pair.scaling.output_scale,
        },
    }
    return write_json(path, doc)


def _scaling_from_doc(doc) -> Optional[PairScaling]:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise WeightsFormatError("scaling must be an object")
    try:
        return PairScaling(
            doc["data_shift"],
            doc["data_scale"],
            doc["theta_shift"],
            doc["theta_scale"],
            doc.get("output_shift", 0.0),
            doc.get("output_scale", 1.0),
        )
    except KeyError as e:
        raise WeightsFormatError(f"scaling: missing {e}") from e
    except (ShapeError, TypeError, ValueError) as e:
        raise WeightsFormatError(f"scaling: {e}") from e


def load_weights(path: Union[str, Path]) -> EncoderDecoderPair:
    """Read a pair written by save_weights"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise WeightsFormatError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict) or "encoder" not in doc or "decoder" not in doc:
        raise WeightsFormatError("document must contain 'encoder' and 'decoder'")
    encoder = _mlp_from_doc(doc["encoder"], "encoder")
    decoder = _mlp_from_doc(doc["decoder"], "decoder")
    scaling = _scaling_from_doc(doc.get("scaling"))
    try:
        return EncoderDecoderPair(encoder, decoder, scaling)
    except ShapeError as e:
        raise WeightsFormatError(str(e)) from e
