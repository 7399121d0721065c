"""
Experiment configuration: one flat record, loadable from JSON, overridable
field by field from the command line.

``oracle`` names the victim: a built-in fixture (``linear20``, ``mlp8``...),
a JSON model file (``{"kind": "linear", ...}`` plus optional label fields),
or an ``http(s)://`` URL of a remote prediction endpoint.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..bilateral import FilterConfig, GuideSelection
from ..errors import ConfigError
from ..gradprior import DISTANCES, PriorConfig, Variant
from ..victims import OracleSpec, RemoteModel, model_from_dict, read_image
from .fixtures import FIXTURES, get_fixture

SMALL_GRAY_FILTER = (2.0, 8 / 255)
DEFAULT_FILTER = (8.0, 32 / 255)


@dataclass
class ExperimentConfig:
    oracle: Optional[str] = None
    target: Optional[str] = None
    init: Optional[str] = None
    pairs: List[dict] = field(default_factory=list)
    target_label: Optional[int] = None
    original_label: Optional[int] = None
    untargeted: bool = False
    class_count: Optional[int] = None

    budget: int = 5000
    milestones: List[int] = field(default_factory=lambda: [1000, 3000, 5000])
    mse_threshold: float = 0.001
    variants: List[str] = field(default_factory=lambda: ["full"])
    seeds: List[int] = field(default_factory=lambda: [0])

    # None means "use the victim's default" (fixture setting, else 100)
    B: Optional[int] = None
    k: int = 5
    tau: float = 0.2
    rho: float = 0.1
    distance_metric: str = "mse"
    baseline_correction: bool = False

    sigma_s: Optional[float] = None
    sigma_r: Optional[float] = None
    radius: Optional[int] = None
    guide_mode: str = GuideSelection.TARGET_IMAGE.value
    renormalize: bool = True

    search_tol: Union[float, str] = 1e-3
    max_step_attempts: int = 10
    init_attempts: int = 100
    max_iterations: Optional[int] = None

    timeout: float = 5.0
    max_retries: int = 2
    workers: int = 1
    output_dir: str = "results"

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_dict(cls, doc):
        unknown = sorted(set(doc) - set(cls.field_names()))
        if unknown:
            raise ConfigError([f"unknown config field {name!r}" for name in unknown])
        return cls(**doc)

    def to_dict(self):
        return asdict(self)

    def merged(self, overrides):
        """Copy with every non-None entry of ``overrides`` applied."""
        doc = self.to_dict()
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return type(self).from_dict(doc)

    def problems(self):
        out = []

        def positive_int(name, value):
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                out.append(f"{name} must be a positive integer, got {value!r}")

        resolvable = bool(self.oracle) and (
            is_url(self.oracle) or self.oracle in FIXTURES or Path(self.oracle).is_file()
        )
        if not self.oracle:
            out.append("oracle is required")
        elif not resolvable:
            out.append(f"oracle {self.oracle!r} is not a fixture, file or URL")
        positive_int("budget", self.budget)
        if not self.milestones:
            out.append("milestones must not be empty")
        for m in self.milestones:
            positive_int("milestone", m)
        if not (isinstance(self.mse_threshold, (int, float)) and self.mse_threshold > 0):
            out.append(f"mse_threshold must be positive, got {self.mse_threshold!r}")
        if not self.variants:
            out.append("variants must not be empty")
        for v in self.variants:
            if v not in {x.value for x in Variant}:
                out.append(f"unknown variant {v!r}")
        if not self.seeds:
            out.append("seeds must not be empty")
        for s in self.seeds:
            if not isinstance(s, int) or isinstance(s, bool) or s < 0:
                out.append(f"seed must be a non-negative integer, got {s!r}")
        if self.B is not None:
            positive_int("B", self.B)
        positive_int("k", self.k)
        if not self.tau > 0:
            out.append(f"tau must be positive, got {self.tau!r}")
        if not -1 < self.rho < 1:
            out.append(f"rho must lie in (-1, 1), got {self.rho!r}")
        if self.distance_metric not in DISTANCES:
            out.append(f"distance_metric must be one of {sorted(DISTANCES)}")
        for name in ("sigma_s", "sigma_r"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                out.append(f"{name} must be positive, got {value!r}")
        if self.radius is not None:
            positive_int("radius", self.radius)
        if self.guide_mode not in {g.value for g in GuideSelection}:
            out.append(f"guide_mode must be one of {[g.value for g in GuideSelection]}")
        if self.search_tol != "hsja" and not (
            isinstance(self.search_tol, (int, float)) and 0 < self.search_tol < 1
        ):
            out.append(f"search_tol must lie in (0, 1) or be 'hsja', got {self.search_tol!r}")
        positive_int("max_step_attempts", self.max_step_attempts)
        positive_int("init_attempts", self.init_attempts)
        if self.max_iterations is not None:
            positive_int("max_iterations", self.max_iterations)
        if not self.timeout > 0:
            out.append(f"timeout must be positive, got {self.timeout!r}")
        if not isinstance(self.max_retries, int) or self.max_retries < 0:
            out.append(f"max_retries must be a non-negative integer, got {self.max_retries!r}")
        positive_int("workers", self.workers)

        for key, path in self._image_paths():
            if not Path(path).is_file():
                out.append(f"{key} image {path!r} does not exist")
        if resolvable and self.oracle not in FIXTURES and not self.pairs and not self.target:
            out.append("non-fixture oracles need a target image (target or pairs)")
        if self.oracle and is_url(self.oracle):
            if self.class_count is None:
                out.append("remote oracles need class_count")
            if self.target_label is None and not self.untargeted:
                out.append("remote oracles need target_label or untargeted")
        return out

    def _image_paths(self):
        if self.target:
            yield "target", self.target
        if self.init:
            yield "init", self.init
        for i, pair in enumerate(self.pairs):
            for key in ("target", "init"):
                if pair.get(key):
                    yield f"pairs[{i}].{key}", pair[key]

    def validate(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self


def is_url(ref):
    return isinstance(ref, str) and ref.startswith(("http://", "https://"))


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ExperimentConfig.from_dict(doc)


def default_filter(shape):
    """Small single-channel images use the fine filter, everything else the coarse one."""
    sigma_s, sigma_r = SMALL_GRAY_FILTER if tuple(shape) == (28, 28, 1) else DEFAULT_FILTER
    return sigma_s, sigma_r


@dataclass
class Victim:
    """A resolved oracle plus the image pairs to attack."""

    name: str
    spec: OracleSpec
    pairs: list
    filter: Optional[FilterConfig] = None
    B: int = 100


def _read(path):
    return read_image(path).to_array()


def _labels(config, doc=None):
    doc = doc or {}

    def pick(key):
        value = getattr(config, key)
        return value if value is not None else doc.get(key)

    untargeted = config.untargeted or bool(doc.get("untargeted", False))
    return dict(
        target_label=pick("target_label"),
        original_label=pick("original_label"),
        untargeted=untargeted,
    )


def resolve_victim(config):
    ref = config.oracle
    fixture = None
    if ref in FIXTURES:
        fixture = get_fixture(ref)
        spec = fixture.spec
        if config.untargeted:
            from ..victims import untargeted_view

            spec = untargeted_view(spec)
    elif is_url(ref):
        model = RemoteModel(ref, config.class_count, config.timeout, config.max_retries)
        spec = OracleSpec(model, **_labels(config))
    else:
        with open(ref) as fh:
            doc = json.load(fh)
        model = model_from_dict(doc, Path(ref).parent)
        spec = OracleSpec(model, **_labels(config, doc))

    pairs = []
    listed = list(config.pairs)
    if config.target:
        listed.insert(0, {"target": config.target, "init": config.init})
    for pair in listed:
        target = _read(pair["target"])
        init = _read(pair["init"]) if pair.get("init") else None
        pairs.append((target, init))
    if not pairs:
        pairs = [(fixture.target, fixture.x_init)]

    shape = np.shape(pairs[0][0])
    if fixture is not None and config.sigma_s is None and config.sigma_r is None:
        filt = FilterConfig(fixture.filter.sigma_s, fixture.filter.sigma_r, config.radius)
    else:
        sigma_s, sigma_r = default_filter(shape)
        filt = FilterConfig(
            config.sigma_s if config.sigma_s is not None else sigma_s,
            config.sigma_r if config.sigma_r is not None else sigma_r,
            config.radius,
        )
    if config.B is not None:
        B = config.B
    else:
        B = fixture.prior.B if fixture is not None else PriorConfig().B
    return Victim(ref if fixture is None else fixture.name, spec, pairs, filt, B)


def prior_config(config, variant, B):
    return PriorConfig(
        B=B,
        k=config.k,
        tau=config.tau,
        rho=config.rho,
        distance_metric=config.distance_metric,
        variant=variant,
        baseline_correction=config.baseline_correction,
    )

