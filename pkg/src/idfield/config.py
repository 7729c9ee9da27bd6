"""Experiment configuration: schema, validation and model construction."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .field import FieldSpec, KernelFamily, SignClass
from .levy import LevyMeasure, NoJumps, PointMasses, StablePair, Tempered
from .measure import DomainPartition, LocalCharacteristics
from .stable import StableSpec


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` holds field-level messages."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Box(_Model):
    lower: list[float]
    upper: list[float]


class Domain(_Model):
    lower: list[float]
    upper: list[float]
    shape: list[int]
    null_boxes: list[Box] = []

    @model_validator(mode="after")
    def _check(self):
        if not (len(self.lower) == len(self.upper) == len(self.shape)):
            raise ValueError("lower, upper and shape must have the same length")
        if not 1 <= len(self.shape) <= 3:
            raise ValueError("domain dimension must be 1, 2 or 3")
        if any(k < 1 for k in self.shape):
            raise ValueError("grid resolution must be >= 1 per axis")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("upper must exceed lower on every axis")
        return self


class NoJumpsConfig(_Model):
    family: Literal["none"]


class PointMassesConfig(_Model):
    family: Literal["point_masses"]
    atoms: list[tuple[float, float]]


class StableConfig(_Model):
    family: Literal["stable"]
    alpha: float = Field(gt=0, lt=2)
    c_plus: float = Field(ge=0)
    c_minus: float = Field(ge=0)


class TemperedConfig(_Model):
    family: Literal["tempered"]
    alpha: float = Field(gt=0, lt=2)
    c_plus: float = Field(ge=0)
    c_minus: float = Field(ge=0)
    theta: float = Field(gt=0)


RhoConfig = Annotated[
    Union[NoJumpsConfig, PointMassesConfig, StableConfig, TemperedConfig],
    Field(discriminator="family"),
]


class Characteristics(_Model):
    a: float = 0.0
    sigma2: float = Field(default=0.0, ge=0)
    rho: RhoConfig = NoJumpsConfig(family="none")
    beta: float = Field(default=0.0, ge=-1, le=1)


class KernelConfig(_Model):
    preset: Literal["indicator", "scaled_box", "translated", "constant"]
    sign_class: SignClass = SignClass.MIXED
    # indicator / scaled_box
    lower: list[float] | None = None
    upper: list[float] | None = None
    translate: bool = False
    scale: float = 1.0
    # scaled_box
    base: float = 1.0
    rate: float = 0.0
    ref: list[float] | None = None
    value_at_ref: float | None = None
    # translated
    profile: Literal["gaussian", "triangle", "ramp", "bump"] = "gaussian"
    width: float = Field(default=1.0, gt=0)
    # constant
    value: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if self.preset in ("indicator", "scaled_box") and (self.lower is None or self.upper is None):
            raise ValueError(f"preset '{self.preset}' requires lower and upper")
        return self


class _Experiment(_Model):
    t_index: list[int] | None = None


class CfCheck(_Experiment):
    name: Literal["cf_check"]
    theta: list[list[float]]


class Independence(_Model):
    name: Literal["independence"]
    K: list[int] = Field(min_length=1)
    L: list[int] = Field(min_length=1)
    theta: list[list[float]] | None = None


class Association(_Model):
    name: Literal["association"]
    I: list[int] = Field(min_length=1)
    n_pairs: int = Field(default=50, ge=1)


class NegativeAssociation(_Model):
    name: Literal["negative_association"]
    I: list[int] = Field(min_length=1)
    J: list[int] = Field(min_length=1)
    n_pairs: int = Field(default=50, ge=1)


class IdCheck(_Experiment):
    name: Literal["id"]
    n_fold: int = Field(ge=2)
    theta: list[list[float]] | None = None


class Continuity(_Model):
    name: Literal["continuity"]
    t: list[float]
    radii: list[float] = Field(min_length=1)
    eps_x: float = Field(gt=0)
    direction: list[float] | None = None

    @field_validator("radii")
    @classmethod
    def _decreasing(cls, v):
        if any(r <= 0 for r in v) or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("radii must be positive and strictly decreasing")
        return v


class StableSpectral(_Experiment):
    name: Literal["stable_spectral"]
    alpha: float | None = Field(default=None, gt=0, lt=2)
    theta: list[list[float]] | None = None
    cf_tol: float = Field(default=0.01, gt=0)


class NullCheck(_Experiment):
    name: Literal["null_check"]
    alpha: float | None = Field(default=None, gt=0, lt=2)


ExperimentEntry = Annotated[
    Union[CfCheck, Independence, Association, NegativeAssociation, IdCheck, Continuity, StableSpectral, NullCheck],
    Field(discriminator="name"),
]

EXPERIMENT_NAMES = (
    "cf_check", "independence", "association", "negative_association",
    "id", "continuity", "stable_spectral", "null_check",
)


class ExperimentConfig(_Model):
    domain: Domain
    characteristics: Characteristics = Characteristics()
    kernel: KernelConfig
    t_points: list[list[float]] = Field(min_length=1)
    experiments: list[ExperimentEntry] = []
    samples: int = Field(default=10000, ge=1)
    epsilon: float = Field(default=1e-3, gt=0, le=1)
    level: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_indices(self):
        n = len(self.t_points)
        d = {len(t) for t in self.t_points}
        if len(d) != 1:
            raise ValueError("all t_points must have the same dimension")
        for k, e in enumerate(self.experiments):
            for attr in ("t_index", "K", "L", "I", "J"):
                idx = getattr(e, attr, None)
                if idx and any(not 0 <= i < n for i in idx):
                    raise ValueError(f"experiments.{k}.{attr}: index out of range for {n} t_points")
            for attr in ("K", "I"):
                other = {"K": "L", "I": "J"}[attr]
                a, b = getattr(e, attr, None), getattr(e, other, None)
                if a and b and set(a) & set(b):
                    raise ValueError(f"experiments.{k}: {attr} and {other} must be disjoint")
        return self


def parse_config(data: dict) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msgs = []
        for err in exc.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "<root>"
            msgs.append(f"{loc}: {err['msg']}")
        raise ConfigError(msgs) from None
    build_field_spec(cfg)  # kernel sign spot check and model construction
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: not valid YAML/JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a mapping"])
    return parse_config(data)


# ---------------------------------------------------------------------------
# model construction


def build_partition(domain: Domain) -> DomainPartition:
    part = DomainPartition.grid(domain.lower, domain.upper, domain.shape)
    if domain.null_boxes:
        pts = part.points
        masses = part.masses.copy()
        for box in domain.null_boxes:
            inside = np.all((pts >= box.lower) & (pts <= box.upper), axis=1)
            masses[inside] = 0.0
        part = part.with_masses(masses)
    return part


def build_rho(rho) -> LevyMeasure:
    if rho.family == "none":
        return NoJumps()
    if rho.family == "point_masses":
        return PointMasses(tuple(rho.atoms))
    if rho.family == "stable":
        return StablePair(rho.alpha, rho.c_plus, rho.c_minus)
    return Tempered(rho.alpha, rho.c_plus, rho.c_minus, rho.theta)


def _in_box(x, lo, hi):
    return np.all((x >= lo) & (x < hi), axis=1)


def _profile(name, width):
    if name == "gaussian":
        return lambda y: np.exp(-0.5 * np.sum(y * y, axis=1) / width**2)
    if name == "triangle":
        return lambda y: np.prod(np.clip(1 - np.abs(y) / width, 0, None), axis=1)
    if name == "ramp":
        return lambda y: y[:, 0] / width

    def bump(y):
        r2 = np.sum(y * y, axis=1) / width**2
        out = np.zeros(len(y))
        inside = r2 < 1
        out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
        return out

    return bump


def build_kernels(k: KernelConfig) -> KernelFamily:
    if k.preset == "constant":
        func = lambda t, x: np.full(len(x), k.value)
    elif k.preset == "indicator":
        lo, hi = np.asarray(k.lower, float), np.asarray(k.upper, float)

        def func(t, x):
            shift = t if k.translate else 0.0
            return k.scale * _in_box(x, lo + shift, hi + shift).astype(float)
    elif k.preset == "scaled_box":
        lo, hi = np.asarray(k.lower, float), np.asarray(k.upper, float)

        def func(t, x):
            ref = np.zeros_like(t) if k.ref is None else np.asarray(k.ref, float)
            dist = float(np.linalg.norm(t - ref))
            amp = k.base + k.rate * dist
            if k.value_at_ref is not None and dist == 0.0:
                amp = k.value_at_ref
            return amp * _in_box(x, lo, hi).astype(float)
    else:
        phi = _profile(k.profile, k.width)

        def func(t, x):
            shift = np.zeros(x.shape[1])
            shift[: min(t.size, x.shape[1])] = t[: x.shape[1]]
            return k.scale * phi(x - shift)
    return KernelFamily(func, k.sign_class)


def build_field_spec(cfg: ExperimentConfig) -> FieldSpec:
    part = build_partition(cfg.domain)
    c = cfg.characteristics
    chars = LocalCharacteristics(a=c.a, sigma2=c.sigma2, rho=build_rho(c.rho))
    kernels = build_kernels(cfg.kernel)
    try:
        kernels.check_sign(cfg.t_points, *part.bounds, n=1000, seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError([f"kernel.sign_class: {exc}"]) from None
    return FieldSpec(kernels, chars, part)


def build_stable_spec(cfg: ExperimentConfig, alpha: float | None = None) -> StableSpec:
    if alpha is None:
        rho = cfg.characteristics.rho
        if rho.family not in ("stable",):
            raise ConfigError(["experiments: stable experiments need alpha or a stable rho family"])
        alpha = rho.alpha
    return StableSpec(alpha, cfg.characteristics.beta, build_partition(cfg.domain), build_kernels(cfg.kernel))
