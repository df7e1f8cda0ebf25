"""Pipeline configuration: one JSON document with a section per stage.

Every section is a dataclass; loading rejects unknown sections and keys so
that typos fail loudly instead of silently falling back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass
class GaborConfig:
    n_orientations: int = 16
    n_scales: int = 2
    kernel_extent: int = 17
    aspect: float = 0.6
    saturation: float = 20.0
    threshold: float = 0.0


@dataclass
class ActiveBasisConfig:
    n_elements: int = 10
    location_perturbation: int = 3
    orientation_perturbation: int = 1
    inhibition_radius: float = None  # None -> half the kernel extent
    inhibition_angle: float = float(np.pi / 4)
    background_pool: int = 50
    delta_max: float = 3.0
    template_shape: list = None  # [rows, cols]; None -> two thirds of the frame
    region_margin: int = 4
    scan_stride: int = 1


@dataclass
class FlowConfig:
    # lighter than the optical_flow module defaults: the pooled motion
    # features barely change and each frame pair is ~4x cheaper
    smoothness: float = 0.02
    symmetric: float = 0.0
    pyramid_levels: int = 4
    outer_iterations: int = 3
    inner_iterations: int = 1
    epsilon: float = 1e-3
    downsample: float = 0.5
    max_backtracks: int = 6


@dataclass
class SynergeticConfig:
    B: float = 1.0
    C: float = 1.0
    dt: float = 0.01
    max_steps: int = 100_000
    tolerance: float = 1e-8
    p1: float = 0.1
    p2: float = 0.1
    pattern_block: int = 4


@dataclass
class AttentionConfig:
    balanced: bool = False
    particles: int = 20
    iterations: int = 500
    lambda_min: float = 0.1
    lambda_max: float = 10.0
    alpha_start: float = 1.0
    alpha_end: float = 0.5
    alpha_constant: bool = False
    initializer: str = "cvt"
    horizon_steps: int = 200
    include_balanced: bool = True  # one particle starts at lambda = 1


@dataclass
class CvtSection:
    samples: int = None  # None -> 64 per generator
    iterations: int = 100
    j1: float = 1.0
    j2: float = 1.0


@dataclass
class FuzzyConfig:
    sigma_floor_fraction: float = 1e-6


@dataclass
class DatasetConfig:
    manifest: str = None
    target_width: int = 200
    target_height: int = 142
    mirror: bool = False
    train_subjects: list = None  # None -> every subject in the manifest


@dataclass
class TrainingConfig:
    scenario: int = 1
    snippets: int = 5
    subjects: int = 5
    key_quantiles: list = field(default_factory=lambda: [0.125, 0.375, 0.625, 0.875])
    seed: int = 0


SECTIONS = {
    "gabor": GaborConfig,
    "active_basis": ActiveBasisConfig,
    "flow": FlowConfig,
    "synergetic": SynergeticConfig,
    "attention": AttentionConfig,
    "cvt": CvtSection,
    "fuzzy": FuzzyConfig,
    "dataset": DatasetConfig,
    "training": TrainingConfig,
}


@dataclass
class PipelineConfig:
    gabor: GaborConfig = field(default_factory=GaborConfig)
    active_basis: ActiveBasisConfig = field(default_factory=ActiveBasisConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    synergetic: SynergeticConfig = field(default_factory=SynergeticConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    cvt: CvtSection = field(default_factory=CvtSection)
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        t = self.training
        if t.scenario not in (1, 2):
            raise ConfigurationError(f"scenario must be 1 or 2, got {t.scenario}")
        if t.snippets < 1 or t.subjects < 1:
            raise ConfigurationError("snippets and subjects must be >= 1")
        if not t.key_quantiles or any(not 0 <= q < 1 for q in t.key_quantiles):
            raise ConfigurationError("key quantiles must lie in [0, 1)")
        a = self.attention
        if not 0 < a.lambda_min <= a.lambda_max:
            raise ConfigurationError("need 0 < lambda_min <= lambda_max")
        if a.horizon_steps < 1 or a.particles < 2 or a.iterations < 0:
            raise ConfigurationError("invalid attention search settings")
        if self.synergetic.pattern_block < 1:
            raise ConfigurationError("pattern_block must be >= 1")
        ts = self.active_basis.template_shape
        if ts is not None and (len(ts) != 2 or min(ts) < self.gabor.kernel_extent):
            raise ConfigurationError("template_shape must be [rows, cols], each at least the kernel extent")
        if self.dataset.target_width < 1 or self.dataset.target_height < 1:
            raise ConfigurationError("target resolution must be positive")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError("configuration must be a mapping")
        unknown = sorted(set(d) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"unknown configuration section(s): {', '.join(unknown)}")
        kw = {}
        for name, section in SECTIONS.items():
            values = d.get(name, {})
            if not isinstance(values, dict):
                raise ConfigurationError(f"section {name!r} must be a mapping")
            known = {f.name for f in dataclasses.fields(section)}
            bad = sorted(set(values) - known)
            if bad:
                raise ConfigurationError(f"unknown key(s) in section {name!r}: {', '.join(bad)}")
            kw[name] = section(**values)
        return cls(**kw)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(d)

    def replace(self, **sections):
        """Copy with some section fields overridden: ``cfg.replace(training={"scenario": 2})``."""
        d = self.to_dict()
        for name, values in sections.items():
            if name not in SECTIONS:
                raise ConfigurationError(f"unknown configuration section {name!r}")
            d[name].update(values)
        return PipelineConfig.from_dict(d)
