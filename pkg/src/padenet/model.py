"""Model assembly: the 18-layer architecture (seven rational-convolution
blocks, flatten, dropout, two dense heads), parameter counting, and
checkpoint serialisation.

Block b halves the sequence length, so a 1000-sample input traces
1000 -> 500 -> 250 -> 125 -> 62 -> 31 -> 15 -> 7, flattens to 224 features
and ends in dense-64 (tanh) and dense-8 (softmax) heads.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, field, replace

import numpy as np

from . import autodiff as ad
from .container import read_container, write_container
from .errors import CheckpointError, ConfigError
from .layers import Activation, Dense, Dropout, Flatten, MaxPool1D, PadeConv1D
from .numerics import RngStream

EVAL_BATCH = 256

_DTYPE_NAMES = {"float64": np.float64, "float32": np.float32}


@dataclass
class ModelConfig:
    p: int = 1
    q: int = 0
    activation: str = "tanh"
    filters: int = 32
    kernel: int = 7
    blocks: int = 7
    dense_units: int = 64
    classes: int = 8
    dropout: float = 0.25
    l2_lambda: float = 1e-4
    input_length: int = 1000
    input_channels: int = 1

    def validate(self) -> list[str]:
        """Returns every violated constraint (empty list = valid)."""
        errs = []
        if self.p < 1:
            errs.append(f"p must be >= 1, got {self.p}")
        if self.q < 0:
            errs.append(f"q must be >= 0, got {self.q}")
        if self.activation not in ("tanh", "leaky_relu"):
            errs.append(f"activation must be tanh or leaky_relu, got {self.activation!r}")
        if self.q == 0 and self.p >= 2 and self.activation != "tanh":
            errs.append(
                "polynomial models (Q=0, P>=2) require tanh to keep activations bounded"
            )
        if self.kernel < 1 or self.kernel % 2 == 0:
            errs.append(f"kernel must be odd and >= 1, got {self.kernel}")
        if self.filters < 1:
            errs.append(f"filters must be >= 1, got {self.filters}")
        if self.blocks < 1:
            errs.append(f"blocks must be >= 1, got {self.blocks}")
        if not 0.0 <= self.dropout < 1.0:
            errs.append(f"dropout must be in [0, 1), got {self.dropout}")
        if self.l2_lambda < 0:
            errs.append(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if self.input_length < 2**self.blocks:
            errs.append(
                f"input_length {self.input_length} too short for {self.blocks} pooling stages"
            )
        if self.classes < 2:
            errs.append(f"classes must be >= 2, got {self.classes}")
        return errs

    def check(self) -> "ModelConfig":
        errs = self.validate()
        if errs:
            raise ConfigError("invalid model config: " + "; ".join(errs))
        return self


class Model:
    """Built network: ordered layer list plus the trainable leaf registry."""

    def __init__(self, config: ModelConfig, layers: list, dtype=np.float64):
        self.config = config
        self.layers = layers
        self.dtype = dtype

    def forward(self, x, train: bool = False, dropout_rng: RngStream | None = None) -> ad.Var:
        """Probabilities (B, classes) for input (B, M, C)."""
        out = x if isinstance(x, ad.Var) else ad.Var(np.asarray(x, dtype=self.dtype))
        for layer in self.layers:
            if isinstance(layer, Dropout):
                out = layer.forward(out, train=train, rng=dropout_rng)
            else:
                out = layer.forward(out)
        return out

    def predict_proba(self, x: np.ndarray, batch: int = EVAL_BATCH) -> np.ndarray:
        """Inference-mode probabilities, computed without gradient tracking."""
        x = np.asarray(x, dtype=self.dtype)
        outs = []
        with ad.no_grad():
            for i in range(0, len(x), batch):
                outs.append(self.forward(x[i : i + batch]).data)
        return np.concatenate(outs, axis=0)

    def predict(self, x: np.ndarray, batch: int = EVAL_BATCH) -> np.ndarray:
        return self.predict_proba(x, batch).argmax(axis=1)

    def params(self) -> list[ad.Var]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def kernel_params(self) -> list[ad.Var]:
        """Convolution kernel banks (the L2 penalty targets)."""
        out = []
        for layer in self.layers:
            if isinstance(layer, PadeConv1D):
                out.extend(layer.kernel_params())
        return out

    def shape_trace(self, include_activations: bool = False) -> list[tuple[str, tuple]]:
        """(layer name, output shape) rows with a symbolic batch extent."""
        cfg = self.config
        x = np.zeros((1, cfg.input_length, cfg.input_channels), dtype=self.dtype)
        rows = []
        with ad.no_grad():
            out = ad.Var(x)
            for layer in self.layers:
                if isinstance(layer, Dropout):
                    out = layer.forward(out, train=False)
                else:
                    out = layer.forward(out)
                if isinstance(layer, Activation) and not include_activations:
                    continue
                rows.append((layer.name, (None,) + out.data.shape[1:]))
        return rows

    def get_state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.params()]

    def set_state(self, state: list[np.ndarray]) -> None:
        for p, s in zip(self.params(), state):
            if p.data.shape != s.shape:
                raise CheckpointError(f"state shape {s.shape} != param {p.name} {p.data.shape}")
            p.data = s.astype(self.dtype, copy=True)


def build_model(config: ModelConfig, rng: RngStream, dtype=np.float64) -> Model:
    """Assembles the network; initial weights are drawn from `rng` in layer
    order, so equal seeds give identical parameters."""
    config.check()
    layers: list = []
    cin = config.input_channels
    for b in range(1, config.blocks + 1):
        layers.append(
            PadeConv1D(
                cin,
                config.filters,
                kernel=config.kernel,
                p=config.p,
                q=config.q,
                name=f"pade{b}",
                rng=rng,
                dtype=dtype,
            )
        )
        layers.append(Activation(config.activation))
        layers.append(MaxPool1D(2, name=f"maxpool{b}"))
        cin = config.filters
    layers.append(Flatten())
    layers.append(Dropout(config.dropout))
    flat = config.filters * (config.input_length >> config.blocks)
    layers.append(Dense(flat, config.dense_units, "tanh", name="dense1", rng=rng, dtype=dtype))
    layers.append(
        Dense(config.dense_units, config.classes, "softmax", name="dense2", rng=rng, dtype=dtype)
    )
    return Model(config, layers, dtype)


def count_params(model: Model) -> int:
    """Total trainable scalars (exactly the set the optimizer updates)."""
    return sum(p.data.size for p in model.params())


def config_param_count(config: ModelConfig) -> int:
    """Closed-form count for a config, without building the model."""
    total = 0
    cin = config.input_channels
    for _ in range(config.blocks):
        kern = cin * config.filters * config.kernel
        total += config.p * (kern + config.filters) + config.q * kern
        cin = config.filters
    flat = config.filters * (config.input_length >> config.blocks)
    total += flat * config.dense_units + config.dense_units
    total += config.dense_units * config.classes + config.classes
    return total


def save_checkpoint(model: Model, path) -> None:
    """Bit-exact snapshot: config as header lines, parameters as named float64
    arrays (float32 values are exactly representable in float64)."""
    header = {"kind": "model", "dtype": np.dtype(model.dtype).name}
    header.update({k: v for k, v in asdict(model.config).items()})
    arrays = [(p.name, p.data.astype("<f8")) for p in model.params()]
    write_container(path, header, arrays)


def load_checkpoint(path) -> Model:
    header, arrays = read_container(path)
    if header.get("kind") != "model":
        raise CheckpointError(f"{path}: container holds {header.get('kind')!r}, not a model")
    dtype = _DTYPE_NAMES.get(header.get("dtype", "float64"))
    if dtype is None:
        raise CheckpointError(f"{path}: unknown model dtype {header.get('dtype')!r}")
    try:
        cfg = ModelConfig(
            p=int(header["p"]),
            q=int(header["q"]),
            activation=header["activation"],
            filters=int(header["filters"]),
            kernel=int(header["kernel"]),
            blocks=int(header["blocks"]),
            dense_units=int(header["dense_units"]),
            classes=int(header["classes"]),
            dropout=float(header["dropout"]),
            l2_lambda=float(header["l2_lambda"]),
            input_length=int(header["input_length"]),
            input_channels=int(header["input_channels"]),
        )
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"{path}: incomplete or malformed config block: {e}") from e
    try:
        cfg.check()
    except ConfigError as e:
        raise CheckpointError(f"{path}: {e}") from e

    model = build_model(cfg, RngStream(0), dtype=dtype)
    expected = {p.name: p for p in model.params()}
    if set(arrays) != set(expected):
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        raise CheckpointError(
            f"{path}: parameter set does not match declared config"
            f" (missing {missing[:4]}, unexpected {extra[:4]})"
        )
    for name, p in expected.items():
        arr = arrays[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"{path}: array {name!r} has shape {arr.shape}, expected {p.data.shape}"
            )
        p.data = arr.astype(dtype)
    return model
