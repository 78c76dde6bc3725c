"""Model construction for the three network families compared here.

* ``mlp``  - linear layers over (encoded) per-sample queries,
* ``cnn``  - same-depth convolutions whose sole input is a low-frequency
             version of the target signal,
* ``qnn``  - convolutions over the channel concatenation of encoded queries
             and the low-frequency signal, optionally adding that signal back
             to the network output (residual prediction).

Widths follow a parameter-matching rule so a conv stack and an MLP carry the
same budget: a K-tap 1D conv layer with width w has K*w^2 weights, so
w = round(mlp_width / sqrt(K)); a KxK 2D conv layer needs
w = round(mlp_width / K).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError, ContractError, DimensionError

FAMILIES = ("mlp", "cnn", "qnn")
RANKS = ("1d", "2d")
ENCODING_KINDS = ("vanilla", "fourier", "per_axis_fourier", "exponential")


@dataclass(frozen=True)
class Encoding:
    """A fixed query transform applied before the first layer.

    The frequency matrices of the Fourier variants are drawn once at model
    construction and never trained.
    """

    kind: str = "vanilla"
    input_dim: int = 1
    num_features: int = 256
    sigma: float = 10.0
    num_octaves: int = 4
    frequencies: tuple = field(default=(), repr=False)

    def output_dim(self) -> int:
        if self.kind == "vanilla":
            return self.input_dim
        if self.kind == "fourier":
            return 2 * self.num_features
        if self.kind == "per_axis_fourier":
            return 2 * self.num_features * self.input_dim
        if self.kind == "exponential":
            return 2 * self.num_octaves * self.input_dim
        raise ConfigurationError(f"unknown encoding kind {self.kind!r}")


def make_encoding(kind, input_dim, rng, num_features=256, sigma=10.0,
                  num_octaves=4) -> Encoding:
    """Build an encoding, sampling any frequency matrix from ``rng``."""
    if kind not in ENCODING_KINDS:
        raise ConfigurationError(
            f"unknown encoding kind {kind!r}; expected one of {ENCODING_KINDS}"
        )
    freqs = ()
    if kind == "fourier":
        freqs = (sigma * rng.standard_normal((num_features, input_dim)),)
    elif kind == "per_axis_fourier":
        freqs = tuple(
            sigma * rng.standard_normal((num_features, 1))
            for _ in range(input_dim)
        )
    return Encoding(kind=kind, input_dim=input_dim, num_features=num_features,
                    sigma=sigma, num_octaves=num_octaves, frequencies=freqs)


def encode(enc: Encoding, q: np.ndarray) -> np.ndarray:
    """Map queries (d, *spatial) to encoded channels (C_enc, *spatial)."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim < 2 or q.shape[0] != enc.input_dim:
        raise ConfigurationError(
            f"encoding expects {enc.input_dim} query channels, got shape {q.shape}"
        )
    spatial = q.shape[1:]
    if enc.kind == "vanilla":
        return q.copy()
    flat = q.reshape(enc.input_dim, -1)
    if enc.kind == "fourier":
        phase = 2.0 * np.pi * (enc.frequencies[0] @ flat)
        out = np.concatenate([np.cos(phase), np.sin(phase)], axis=0)
    elif enc.kind == "per_axis_fourier":
        blocks = []
        for axis, freq in enumerate(enc.frequencies):
            phase = 2.0 * np.pi * (freq @ flat[axis:axis + 1])
            blocks.append(np.cos(phase))
            blocks.append(np.sin(phase))
        out = np.concatenate(blocks, axis=0)
    elif enc.kind == "exponential":
        blocks = []
        for axis in range(enc.input_dim):
            for octave in range(enc.num_octaves):
                phase = (2.0 ** octave) * np.pi * flat[axis]
                blocks.append(np.sin(phase)[None, :])
                blocks.append(np.cos(phase)[None, :])
        out = np.concatenate(blocks, axis=0)
    else:
        raise ConfigurationError(f"unknown encoding kind {enc.kind!r}")
    return out.reshape((out.shape[0],) + spatial)


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one network."""

    family: str = "mlp"
    rank: str = "1d"
    depth: int = 4
    width: int = 256
    kernel: int | None = None
    query_channels: int = 1
    low_freq_channels: int = 0
    output_channels: int = 1
    encoding: str = "vanilla"
    encoding_features: int = 256
    encoding_sigma: float = 10.0
    encoding_octaves: int = 4
    activation: str = "relu"
    siren_omega0: float = 30.0
    residual_output: bool = False
    use_bias: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.rank not in RANKS:
            raise ConfigurationError(f"unknown rank {self.rank!r}")
        if self.depth < 1:
            raise ConfigurationError("depth must be at least 1")
        if self.width < 1:
            raise ConfigurationError("width must be at least 1")
        if self.family == "mlp":
            if self.kernel is not None:
                raise ConfigurationError("mlp models do not take a kernel size")
            if self.residual_output:
                raise ConfigurationError(
                    "mlp models have no low-frequency input to add back; "
                    "apply the residual outside the network"
                )
        else:
            if self.kernel is None or self.kernel < 1 or self.kernel % 2 == 0:
                raise ConfigurationError(
                    f"{self.family} needs an odd kernel >= 1, got {self.kernel}"
                )
        if self.family == "cnn" and self.low_freq_channels < 1:
            raise ConfigurationError(
                "cnn consumes the low-frequency signal; low_freq_channels >= 1"
            )
        if self.family == "qnn" and self.low_freq_channels < 0:
            raise ConfigurationError("low_freq_channels must be >= 0")
        if self.encoding not in ENCODING_KINDS:
            raise ConfigurationError(f"unknown encoding {self.encoding!r}")
        if self.activation not in ad.ACTIVATION_KINDS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    def takes_low_freq(self) -> bool:
        return self.family == "cnn" or (
            self.family == "qnn" and self.low_freq_channels > 0
        )

    def input_channels(self, enc: Encoding) -> int:
        if self.family == "mlp":
            return enc.output_dim()
        if self.family == "cnn":
            return self.low_freq_channels
        return enc.output_dim() + self.low_freq_channels


class Model:
    """A built network: spec, frozen encoding, and its parameter list."""

    def __init__(self, spec: ModelSpec, encoding: Encoding, layers):
        self.spec = spec
        self.encoding = encoding
        self.layers = layers  # list of (weight Parameter, bias Parameter|None)

    @property
    def parameters(self):
        params = []
        for w, b in self.layers:
            params.append(w)
            if b is not None:
                params.append(b)
        return params

    def param_count(self) -> int:
        return sum(p.value.size for p in self.parameters)

    def randomize(self, rng, scale=0.5) -> None:
        """Overwrite every parameter with small random values (audit aid)."""
        for p in self.parameters:
            p.assign(scale * rng.standard_normal(p.value.shape))


def matched_width(mlp_width: int, kernel: int, rank: str) -> int:
    """Conv width whose per-layer weight budget matches an MLP's."""
    if rank not in RANKS:
        raise ConfigurationError(f"unknown rank {rank!r}")
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigurationError(f"kernel must be odd and >= 1, got {kernel}")
    factor = np.sqrt(kernel) if rank == "1d" else float(kernel)
    width = int(round(mlp_width / factor))
    if width < 1:
        raise ConfigurationError(
            f"mlp width {mlp_width} is too small for kernel {kernel} ({rank})"
        )
    return width


def _layer_dims(spec: ModelSpec, in_channels: int):
    dims = [in_channels] + [spec.width] * (spec.depth - 1) + [spec.output_channels]
    return list(zip(dims[:-1], dims[1:]))


def expected_param_count(spec: ModelSpec) -> int:
    """Closed-form parameter count implied by a spec."""
    enc = Encoding(kind=spec.encoding, input_dim=spec.query_channels,
                   num_features=spec.encoding_features,
                   num_octaves=spec.encoding_octaves)
    taps = 1
    if spec.family != "mlp":
        taps = spec.kernel if spec.rank == "1d" else spec.kernel ** 2
    total = 0
    for cin, cout in _layer_dims(spec, spec.input_channels(enc)):
        total += cin * cout * taps
        if spec.use_bias:
            total += cout
    return total


def build_model(spec: ModelSpec, seed: int) -> Model:
    """Construct a model deterministically from a seed.

    Weights are uniform in +-1/sqrt(fan_in); biases start at zero. The final
    layer starts at exactly zero so an untrained residual predictor reproduces
    its low-frequency input and an untrained direct predictor outputs zero.
    """
    rng = np.random.default_rng(seed)
    enc = make_encoding(spec.encoding, spec.query_channels, rng,
                        num_features=spec.encoding_features,
                        sigma=spec.encoding_sigma,
                        num_octaves=spec.encoding_octaves)
    taps = 1
    if spec.family != "mlp":
        taps = spec.kernel if spec.rank == "1d" else spec.kernel ** 2
    layers = []
    dims = _layer_dims(spec, spec.input_channels(enc))
    last = len(dims) - 1
    for i, (cin, cout) in enumerate(dims):
        fan_in = cin * taps
        bound = 1.0 / np.sqrt(fan_in)
        draw = rng.uniform(-bound, bound, size=(cout, fan_in))
        if i == last:
            draw = np.zeros_like(draw)
        if spec.family == "mlp":
            value = draw.T
        elif spec.rank == "1d":
            value = draw.reshape(cout, cin, spec.kernel)
        else:
            value = draw.reshape(cout, cin, spec.kernel, spec.kernel)
        w = ad.Parameter(f"layer{i}.weight", value)
        b = ad.Parameter(f"layer{i}.bias", np.zeros(cout)) if spec.use_bias else None
        layers.append((w, b))
    return Model(spec, enc, layers)


def _check_grid(name, arr, channels, rank):
    arr = np.asarray(arr, dtype=np.float64)
    want_ndim = 2 if rank == "1d" else 3
    if arr.ndim != want_ndim or arr.shape[0] != channels:
        raise DimensionError(
            f"{name}: expected ({channels}, ...) with {want_ndim - 1} spatial "
            f"axes for rank {rank}, got shape {arr.shape}"
        )
    return arr


def model_input(model: Model, q, low_freq=None) -> np.ndarray:
    """Assemble the array the first layer consumes (constant w.r.t. training)."""
    spec = model.spec
    if spec.takes_low_freq():
        if low_freq is None:
            raise ContractError(f"{spec.family} model requires a low_freq input")
        low_freq = _check_grid("low_freq", low_freq, spec.low_freq_channels,
                               spec.rank)
    elif low_freq is not None:
        raise ContractError(
            f"{spec.family} model with no low-frequency channels was given one"
        )
    if spec.family == "cnn":
        return low_freq
    q = _check_grid("queries", q, spec.query_channels, spec.rank)
    encoded = encode(model.encoding, q)
    if spec.family == "mlp":
        return encoded.reshape(encoded.shape[0], -1).T  # (N, C_enc)
    if low_freq is None:
        return encoded
    return np.concatenate([encoded, low_freq], axis=0)


def forward_on_tape(tape: ad.Tape, model: Model, q, low_freq=None) -> ad.Node:
    """Run the network on a tape and return the prediction node.

    Output layout is family-native: (N, C_out) for mlp, channels-first grids
    for conv families. With ``residual_output`` set, the low-frequency input
    is added to the network output on the tape.
    """
    spec = model.spec
    x_in = model_input(model, q, low_freq)
    h = tape.constant(x_in)
    last = len(model.layers) - 1
    for i, (w, b) in enumerate(model.layers):
        if b is not None:
            bias = b
        else:
            cout = w.value.shape[1] if spec.family == "mlp" else w.value.shape[0]
            bias = np.zeros(cout)
        if spec.family == "mlp":
            h = ad.linear(tape, h, w, bias)
        elif spec.rank == "1d":
            h = ad.conv1d(tape, h, w, bias)
        else:
            h = ad.conv2d(tape, h, w, bias)
        if i != last:
            h = ad.activation(tape, h, spec.activation, omega0=spec.siren_omega0)
    if spec.residual_output:
        if spec.low_freq_channels != spec.output_channels:
            raise ConfigurationError(
                "residual_output needs matching low-frequency and output channels"
            )
        h = ad.add(tape, h, tape.constant(np.asarray(low_freq, dtype=np.float64)))
    return h


def forward(model: Model, q, low_freq=None) -> ad.Tensor:
    """Single prediction without keeping the tape around."""
    tape = ad.Tape()
    return forward_on_tape(tape, model, q, low_freq).value


def to_grid(spec: ModelSpec, raw: np.ndarray, spatial) -> np.ndarray:
    """Normalize a family-native output to a channels-first grid."""
    raw = np.asarray(raw)
    if spec.family == "mlp":
        return raw.T.reshape((spec.output_channels,) + tuple(spatial))
    return raw.reshape((spec.output_channels,) + tuple(spatial))
