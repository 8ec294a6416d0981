"""Extractor E, on-off predictor P and motion discriminator D.

E: 1-D convolutions over the standardized profile (relu after each), flatten,
   dense projection + relu to the representation.
P: dense layers ending in a 2-way softmax (index 0 off-body, 1 on-body).
D: dense layers over [E(x), stop_gradient(P(E(x)))] ending in an n_z-way softmax.
"""

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from ..config import ArchConfig
from ..errors import InvalidConfigError, ShapeMismatchError
from ..features import PropagationProfile
from ..labels import N_CONTROLLED_MOTIONS, DeviceLabel
from ..nn import Tensor, concat, conv1d, dense, flatten, relu, reshape, softmax, stop_gradient

EXTRACTOR = "extractor"
PREDICTOR = "predictor"
DISCRIMINATOR = "discriminator"


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-feature z-score with training-set statistics"""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardization":
        if x.ndim != 2 or x.shape[0] == 0:
            raise ShapeMismatchError("Standardization needs a non-empty matrix")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        return cls(mean=mean, std=std)

    @classmethod
    def identity(cls, dim: int) -> "Standardization":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.mean.shape[0]:
            raise ShapeMismatchError(
                f"Profiles have {x.shape[-1]} features, the model expects {self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std


def conv_output_lengths(arch: ArchConfig) -> list[int]:
    lengths = [arch.input_dim]
    pad = arch.kernel_width // 2
    for stride in arch.conv_strides:
        lengths.append((lengths[-1] + 2 * pad - arch.kernel_width) // stride + 1)
    return lengths


@dataclass(frozen=True, eq=False)
class ModelParams:
    arch: ArchConfig
    n_z: int
    params: dict[str, np.ndarray]
    """Parameter id -> array, in creation order. Ids are stable across save / load"""
    standardization: Standardization

    def ids(self, block: Optional[str] = None) -> list[str]:
        if block is None:
            return list(self.params)
        return [p for p in self.params if p.startswith(block + ".")]

    def with_params(self, params: Mapping[str, np.ndarray]) -> "ModelParams":
        merged = dict(self.params)
        merged.update(params)
        return ModelParams(self.arch, self.n_z, merged, self.standardization)

    def with_standardization(self, standardization: Standardization) -> "ModelParams":
        return ModelParams(self.arch, self.n_z, dict(self.params), standardization)

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...], gain: float = 1.0):
    bound = gain * np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


def build_model(arch: ArchConfig, n_z: int = N_CONTROLLED_MOTIONS, seed: int = 0) -> ModelParams:
    """He-uniform weights, zero biases, output layers scaled down by head_init_scale"""
    if n_z < 2:
        raise InvalidConfigError("The discriminator needs at least 2 motion classes")
    lengths = conv_output_lengths(arch)
    if lengths[-1] < 1:
        raise InvalidConfigError(f"Convolution stack shrinks the input to {lengths[-1]} positions")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    params: dict[str, np.ndarray] = {}
    k = arch.kernel_width
    in_ch = 1
    for i, out_ch in enumerate(arch.conv_channels):
        params[f"{EXTRACTOR}.conv{i}.weight"] = _uniform(rng, in_ch * k, (out_ch, in_ch, k))
        params[f"{EXTRACTOR}.conv{i}.bias"] = np.zeros(out_ch)
        in_ch = out_ch
    flat = in_ch * lengths[-1]
    params[f"{EXTRACTOR}.projection.weight"] = _uniform(rng, flat, (flat, arch.representation_dim))
    params[f"{EXTRACTOR}.projection.bias"] = np.zeros(arch.representation_dim)

    def head(block: str, in_dim: int, hidden: tuple[int, ...], out_dim: int):
        widths = (in_dim,) + hidden + (out_dim,)
        last = len(widths) - 2
        for i in range(len(widths) - 1):
            gain = arch.head_init_scale if i == last else 1.0
            params[f"{block}.dense{i}.weight"] = _uniform(
                rng, widths[i], (widths[i], widths[i + 1]), gain
            )
            params[f"{block}.dense{i}.bias"] = np.zeros(widths[i + 1])

    head(PREDICTOR, arch.representation_dim, arch.predictor_hidden, 2)
    head(DISCRIMINATOR, arch.representation_dim + 2, arch.discriminator_hidden, n_z)
    return ModelParams(
        arch=arch,
        n_z=n_z,
        params=params,
        standardization=Standardization.identity(arch.input_dim),
    )


def param_leaves(model: ModelParams, trainable: Iterable[str] = ()) -> dict[str, Tensor]:
    wanted = set(trainable)
    return {
        pid: Tensor(value, requires_grad=pid in wanted, name=pid)
        for pid, value in model.params.items()
    }


def _mlp(leaves: Mapping[str, Tensor], block: str, h: Tensor, layers: int) -> Tensor:
    for i in range(layers):
        h = dense(h, leaves[f"{block}.dense{i}.weight"], leaves[f"{block}.dense{i}.bias"])
        h = relu(h) if i < layers - 1 else softmax(h)
    return h


def extractor_forward(model: ModelParams, leaves: Mapping[str, Tensor], x_std: Tensor) -> Tensor:
    arch = model.arch
    if x_std.data.ndim != 2 or x_std.shape[1] != arch.input_dim:
        raise ShapeMismatchError(
            f"Extractor expects (N, {arch.input_dim}) inputs, got {x_std.shape}"
        )
    h = reshape(x_std, (x_std.shape[0], 1, arch.input_dim))
    pad = arch.kernel_width // 2
    for i, stride in enumerate(arch.conv_strides):
        h = relu(
            conv1d(
                h,
                leaves[f"{EXTRACTOR}.conv{i}.weight"],
                leaves[f"{EXTRACTOR}.conv{i}.bias"],
                stride=stride,
                padding=pad,
            )
        )
    h = dense(
        flatten(h),
        leaves[f"{EXTRACTOR}.projection.weight"],
        leaves[f"{EXTRACTOR}.projection.bias"],
    )
    return relu(h)


def predictor_forward(model: ModelParams, leaves: Mapping[str, Tensor], rep: Tensor) -> Tensor:
    return _mlp(leaves, PREDICTOR, rep, len(model.arch.predictor_hidden) + 1)


def discriminator_forward(
    model: ModelParams, leaves: Mapping[str, Tensor], rep: Tensor, p_probs: Tensor
) -> Tensor:
    """D sees the predictor output through a one-way link"""
    joined = concat(rep, stop_gradient(p_probs))
    return _mlp(leaves, DISCRIMINATOR, joined, len(model.arch.discriminator_hidden) + 1)


@dataclass(frozen=True, eq=False)
class OnOffDistribution:
    p_off: float
    p_on: float
    threshold: float = 0.5

    @property
    def decision(self) -> DeviceLabel:
        return DeviceLabel.OnBody if self.p_on >= self.threshold else DeviceLabel.OffBody


def predict_proba(model: ModelParams, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """(N, 2) predictor output for raw (unstandardized) profiles"""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_std = model.standardization.apply(x)
    leaves = param_leaves(model)
    out = [
        predictor_forward(
            model, leaves, extractor_forward(model, leaves, Tensor(x_std[s : s + batch_size]))
        ).data
        for s in range(0, x_std.shape[0], batch_size)
    ]
    return np.concatenate(out) if out else np.zeros((0, 2))


def predict(
    model: ModelParams, profile: Union[np.ndarray, PropagationProfile], threshold: float = 0.5
) -> OnOffDistribution:
    vector = profile.vector if isinstance(profile, PropagationProfile) else np.asarray(profile)
    if vector.ndim != 1:
        raise ShapeMismatchError("predict takes one profile, use predict_proba for batches")
    p = predict_proba(model, vector[None, :])[0]
    return OnOffDistribution(p_off=float(p[0]), p_on=float(p[1]), threshold=threshold)
