"""Trained model bundle and its on-disk directory layout.

    bundle.json        scenario, classes, template index, training report
    templates/NNN.json active basis templates
    bank.json          synergetic prototype bank
    attention.json     attention parameters and the search history
    class_stats.json   fuzzy membership statistics
    config.json        configuration snapshot

All files are JSON written with fixed key order, so equal models give
byte-identical bundles.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .. import active_basis
from ..errors import ConfigurationError
from ..fuzzy_fusion import ClassStats
from ..synergetic import PrototypeBank
from .config import PipelineConfig

BUNDLE_VERSION = 1


@dataclass
class ModelBundle:
    scenario: int
    classes: tuple
    templates: list
    template_labels: list
    bank: PrototypeBank
    attention: np.ndarray
    stats: ClassStats
    config: PipelineConfig
    attention_info: dict = field(default_factory=dict)
    report: list = field(default_factory=list)

    def __post_init__(self):
        self.classes = tuple(self.classes)
        self.attention = np.asarray(self.attention, dtype=float)
        if len(self.templates) != len(self.template_labels):
            raise ConfigurationError("one label per template required")
        for name, labels in (("template", self.template_labels), ("prototype", self.bank.labels)):
            if set(labels) != set(self.classes):
                raise ConfigurationError(f"{name} labels {sorted(set(labels))} differ from classes {list(self.classes)}")
        if tuple(self.stats.classes) != self.classes:
            raise ConfigurationError("class statistics refer to a different class set")
        if self.attention.shape != (self.bank.n_rows,):
            raise ConfigurationError(f"{self.attention.size} attention parameters for {self.bank.n_rows} order parameters")

    @property
    def row_classes(self):
        """Class index of every order parameter."""
        return np.array([self.classes.index(c) for c in self.bank.row_labels])

    def save(self, directory):
        os.makedirs(os.path.join(directory, "templates"), exist_ok=True)
        index = []
        for i, (t, lab) in enumerate(zip(self.templates, self.template_labels)):
            name = f"templates/{i:03d}.json"
            _dump(t.to_dict(), os.path.join(directory, name))
            index.append({"file": name, "label": lab})
        _dump({"version": BUNDLE_VERSION, "scenario": self.scenario, "classes": list(self.classes),
               "templates": index, "report": list(self.report)}, os.path.join(directory, "bundle.json"))
        _dump(self.bank.to_dict(), os.path.join(directory, "bank.json"))
        _dump({"lambda": self.attention.tolist(), **self.attention_info}, os.path.join(directory, "attention.json"))
        _dump(self.stats.to_dict(), os.path.join(directory, "class_stats.json"))
        _dump(self.config.to_dict(), os.path.join(directory, "config.json"))
        return directory

    @classmethod
    def load(cls, directory):
        meta = _read(os.path.join(directory, "bundle.json"))
        if meta.get("version") != BUNDLE_VERSION:
            raise ConfigurationError(f"unsupported bundle version {meta.get('version')}")
        templates = [active_basis.ActiveBasisTemplate.from_dict(_read(os.path.join(directory, t["file"])))
                     for t in meta["templates"]]
        att = _read(os.path.join(directory, "attention.json"))
        lam = att.pop("lambda")
        return cls(
            scenario=meta["scenario"], classes=tuple(meta["classes"]), templates=templates,
            template_labels=[t["label"] for t in meta["templates"]],
            bank=PrototypeBank.from_dict(_read(os.path.join(directory, "bank.json"))),
            attention=np.array(lam, dtype=float),
            stats=ClassStats.from_dict(_read(os.path.join(directory, "class_stats.json"))),
            config=PipelineConfig.from_dict(_read(os.path.join(directory, "config.json"))),
            attention_info=att, report=meta.get("report", []),
        )


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read(path):
    if not os.path.isfile(path):
        raise ConfigurationError(f"bundle file missing: {path}")
    with open(path) as fh:
        return json.load(fh)
