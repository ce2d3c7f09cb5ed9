"""Run configuration: flat ``key = value`` INI sections, one per module.

Only keys listed in SCHEMA are accepted. Values stay strings until a builder asks for a
typed module config, so a snapshot of the resolved file is a faithful record of the run.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from .classifiers import KINDS as CLASSIFIER_KINDS, ClassifierSpec
from .distiller import DEFAULT_SIZES, DistillConfig
from .kernel_ridge import KernelSpec
from .objectives import KINDS as OBJECTIVE_KINDS, ObjectiveSpec
from .tabular_data import SplitSpec


class ConfigError(ValueError):
    pass


SCHEMA: dict[str, dict[str, str]] = {
    "run": {"seed": "0"},
    "data": {"path": "", "label_column": "label", "positive_value": "1", "name": ""},
    "synthetic": {"n": "4000", "d": "10", "ir": "10", "separation": "2.0", "seed": ""},
    "split": {"test_fraction": "0.2", "stratified": "true"},
    "distill": {
        "m": "40", "epochs": "100", "lr_x": "0.01", "lr_y": "0.005", "batch_size": "",
        "learn_labels": "true", "init": "subsample", "noise_sigma": "0.1",
        "synthetic_ir": "match", "lam": "1e-6", "snapshot_every": "",
    },
    "objective": {
        "kind": "ce", "gamma": "2.0", "coe": "", "alpha_w": "", "alpha_g": "0.0",
        "beta_g": "0.0", "coe_mode": "negatives",
    },
    "kernel": {"kind": "rbf", "bandwidth": "auto", "degree": "2", "offset": "1.0"},
    "classifier": {
        "regress_on_ys": "false", "logreg_l2": "1e-3", "logreg_max_iter": "5000",
        "knn_k": "5", "cart_max_depth": "8", "cart_min_leaf": "1", "forest_trees": "100",
        "forest_max_features": "", "forest_max_depth": "12",
    },
    "sweep": {
        "objectives": ",".join(OBJECTIVE_KINDS),
        "sizes": ",".join(map(str, DEFAULT_SIZES)),
        "classifiers": "krr,logreg,knn,cart,forest",
        "seeds": "",
        "random_baseline": "true",
        "full_baseline": "true",
        "threshold": "0.5",
        "project_size": "",
    },
    "calibrate": {
        "grid_alpha": "0.0,0.25,0.5,0.75,1.0",
        "grid_beta": "-1.0,-0.5,0.0,0.5,1.0",
        "m": "20", "epochs": "20", "val_fraction": "0.2",
    },
    "project": {"coresets": ""},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: dict(k) for s, k in SCHEMA.items()})

    # --- construction -----------------------------------------------------------------

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        cfg = cls()
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            cfg.update_from_text(p.read_text(), str(p))
        for item in overrides:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} is not section.key=value")
            key, value = item.split("=", 1)
            section, name = key.strip().split(".", 1)
            cfg.set(section, name, value.strip())
        return cfg

    def update_from_text(self, text: str, source: str = "<config>") -> None:
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                self.set(section, key, value)

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]; "
                              f"allowed: {', '.join(sorted(SCHEMA[section]))}")
        self.values[section][key] = str(value).strip()

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section in SCHEMA:
            parser[section] = dict(sorted(self.values[section].items()))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    # --- typed accessors --------------------------------------------------------------

    def raw(self, section, key) -> str:
        return self.values[section][key]

    def get_int(self, section, key, optional=False):
        v = self.raw(section, key)
        if optional and v == "":
            return None
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {v!r} is not an integer") from None

    def get_float(self, section, key, optional=False):
        v = self.raw(section, key)
        if optional and v == "":
            return None
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {v!r} is not a number") from None

    def get_bool(self, section, key) -> bool:
        v = self.raw(section, key).lower()
        if v in _TRUE:
            return True
        if v in _FALSE:
            return False
        raise ConfigError(f"[{section}] {key} = {v!r} is not a boolean")

    def get_list(self, section, key, conv=str) -> list:
        v = self.raw(section, key)
        try:
            return [conv(x.strip()) for x in v.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key} = {v!r} has a malformed entry") from None

    @property
    def seed(self) -> int:
        return self.get_int("run", "seed")

    # --- module configs ---------------------------------------------------------------

    def split_spec(self) -> SplitSpec:
        return _wrap(lambda: SplitSpec(self.get_float("split", "test_fraction"),
                                       self.get_bool("split", "stratified"), self.seed))

    def kernel_spec(self) -> KernelSpec | None:
        bw = self.raw("kernel", "bandwidth")
        kind = self.raw("kernel", "kind")
        if kind == "rbf" and bw in ("", "auto"):
            return None
        return _wrap(lambda: KernelSpec(
            kind, 1.0 if bw in ("", "auto") else self.get_float("kernel", "bandwidth"),
            self.get_int("kernel", "degree"), self.get_float("kernel", "offset")))

    def objective_spec(self, kind: str | None = None) -> ObjectiveSpec:
        return _wrap(lambda: ObjectiveSpec(
            kind or self.raw("objective", "kind"),
            gamma=self.get_float("objective", "gamma"),
            coe=self.get_float("objective", "coe", optional=True),
            alpha_w=self.get_float("objective", "alpha_w", optional=True),
            alpha_g=self.get_float("objective", "alpha_g"),
            beta_g=self.get_float("objective", "beta_g"),
            coe_mode=self.raw("objective", "coe_mode"),
        ))

    def distill_config(self) -> DistillConfig:
        synth_ir = self.raw("distill", "synthetic_ir")
        return _wrap(lambda: DistillConfig(
            m=self.get_int("distill", "m"),
            epochs=self.get_int("distill", "epochs"),
            lr_x=self.get_float("distill", "lr_x"),
            lr_y=self.get_float("distill", "lr_y"),
            batch_size=self.get_int("distill", "batch_size", optional=True),
            learn_labels=self.get_bool("distill", "learn_labels"),
            init=self.raw("distill", "init"),
            noise_sigma=self.get_float("distill", "noise_sigma"),
            synthetic_ir=synth_ir if synth_ir == "match" else self.get_float("distill",
                                                                              "synthetic_ir"),
            objective=self.objective_spec(),
            kernel=self.kernel_spec(),
            lam=self.get_float("distill", "lam"),
            seed=self.seed,
            snapshot_every=self.get_int("distill", "snapshot_every", optional=True),
        ))

    def classifier_specs(self) -> list[ClassifierSpec]:
        kinds = self.get_list("sweep", "classifiers")
        bad = [k for k in kinds if k not in CLASSIFIER_KINDS]
        if bad:
            raise ConfigError(f"unknown classifier(s) {bad}; allowed {CLASSIFIER_KINDS}")
        out = []
        for k in kinds:
            kw = {}
            if k == "krr":
                kw = dict(regress_on_ys=self.get_bool("classifier", "regress_on_ys"),
                          lam=self.get_float("distill", "lam"))
            elif k == "logreg":
                kw = dict(l2=self.get_float("classifier", "logreg_l2"),
                          max_iter=self.get_int("classifier", "logreg_max_iter"))
            elif k == "knn":
                kw = dict(k=self.get_int("classifier", "knn_k"))
            elif k == "cart":
                kw = dict(max_depth=self.get_int("classifier", "cart_max_depth"),
                          min_leaf=self.get_int("classifier", "cart_min_leaf"))
            else:
                kw = dict(n_trees=self.get_int("classifier", "forest_trees"),
                          max_depth=self.get_int("classifier", "forest_max_depth"),
                          max_features=self.get_float("classifier", "forest_max_features",
                                                      optional=True))
            out.append(_wrap(lambda: ClassifierSpec(k, **kw)))
        return out

    def sweep_objectives(self) -> list[ObjectiveSpec]:
        kinds = self.get_list("sweep", "objectives")
        bad = [k for k in kinds if k not in OBJECTIVE_KINDS]
        if bad:
            raise ConfigError(f"unknown objective(s) {bad}; allowed {OBJECTIVE_KINDS}")
        return [self.objective_spec(k) for k in kinds]

    def sweep_seeds(self) -> list[int]:
        seeds = self.get_list("sweep", "seeds", int)
        return seeds or [self.seed]


def _wrap(build):
    try:
        return build()
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
