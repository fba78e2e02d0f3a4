"""Experiment configuration: flat INI-style sections with strict keys.

Unknown sections or keys are rejected so manifests stay diff-friendly and
typos fail loudly.  All keys are optional unless a subcommand needs them.

[data]
    source   = gaussian | mixture | uniform | file   (default gaussian)
    count    = training rows N                        (default 20)
    dim      = input dimension d                      (default 2)
    classes  = output channels C                      (default 1)
    targets  = gaussian | classes | none              (default gaussian)
    centers  = mixture centers, e.g. "2,2; -2,-2"     (default "2,2; -2,-2")
    sigma    = gaussian/mixture scale                 (default 1.0)
    low/high = uniform box bounds                     (default -1 / 1)
    x_file   = inputs matrix file (source = file)
    y_file   = targets matrix file (optional)
    seed     = data generator seed                    (default 0)

[model]
    kind     = krr | svm | kde
    kernel   = laplace | rbf | polynomial | ntk | bandwidth_gaussian
    gamma    = laplace/rbf/polynomial scale           (default 1.0)
    c0       = polynomial offset                      (default 1.0)
    degree   = polynomial degree                      (default 3)
    depth    = ntk depth                              (default 3)
    bandwidth = explicit bandwidths "h1,h2,..."
    ridge    = ridge-regression penalty               (default 0.0)
    steps    = SVM training steps                     (default 100000)
    lr       = SVM peak learning rate                 (default 0.01)

[attack]
    candidates    = reconstruction points n (upper bound on N)
    queries       = query count m
    steps         = optimization steps T              (default 20000)
    seed          = attack seed                       (default 0)
    distribution  = normal | uniform | mixture | grid | file (default normal)
    sigma         = normal/mixture query scale        (default 1.0)
    low/high      = uniform/grid box bounds           (default -1 / 1)
    centers       = mixture query centers
    query_file    = matrix file of queries (distribution = file)
    lr_points     = peak rate, candidate points       (default 0.02)
    lr_coeffs     = peak rate, coefficients           (default 0.01)
    point_init_std  = candidate init deviation        (default 0.3)
    coeff_init_var  = coefficient init variance       (default 0.05)
    merge_tol     = canonicalization merge radius     (default 1e-3 sqrt(d))
    coeff_tol     = canonicalization drop threshold   (default 1e-6 max|coeff|)
    batch_size    = mini-batch size (default: full batch)
    trace_every   = loss-trace stride                 (default 100)
    learn_bandwidth = true | false                    (default false)
    pca_rank      = project candidates onto this many principal
                    directions of the query sample (default: off)
    snapshots     = comma-separated step indices to snapshot

[metrics]
    distance     = l2 | dssim                         (default l2)
    height/width/channels = image layout (dssim only)
    match_tol    = matched-point tolerance            (default 0.05)
    relative     = tolerance relative to truth norm   (default true)
    l2_threshold = restricted-recovery cutoff for non-image data

[output]
    dir = output directory                            (default "out")
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = ["ExperimentConfig", "load_config"]

_ALLOWED = {
    "data": {"source", "count", "dim", "classes", "targets", "centers",
             "sigma", "low", "high", "x_file", "y_file", "seed"},
    "model": {"kind", "kernel", "gamma", "c0", "degree", "depth",
              "bandwidth", "ridge", "steps", "lr"},
    "attack": {"candidates", "queries", "steps", "seed", "distribution",
               "sigma", "low", "high", "centers", "query_file",
               "lr_points", "lr_coeffs", "point_init_std", "coeff_init_var",
               "merge_tol", "coeff_tol", "batch_size", "trace_every",
               "learn_bandwidth", "pca_rank", "snapshots"},
    "metrics": {"distance", "height", "width", "channels", "match_tol",
                "relative", "l2_threshold"},
    "output": {"dir"},
}

_CHOICES = {
    ("data", "source"): {"gaussian", "mixture", "uniform", "file"},
    ("data", "targets"): {"gaussian", "classes", "none"},
    ("model", "kind"): {"krr", "svm", "kde"},
    ("model", "kernel"): {"laplace", "rbf", "polynomial", "ntk",
                          "bandwidth_gaussian"},
    ("attack", "distribution"): {"normal", "uniform", "mixture", "grid", "file"},
    ("metrics", "distance"): {"l2", "dssim"},
}


class ExperimentConfig:
    """Typed access to the validated sections of a config file."""

    def __init__(self, sections: dict[str, dict[str, str]]):
        self._sections = sections

    @classmethod
    def empty(cls) -> "ExperimentConfig":
        return cls({})

    def _raw(self, section, key):
        return self._sections.get(section, {}).get(key)

    def has(self, section, key) -> bool:
        return self._raw(section, key) is not None

    def get(self, section, key, default=None):
        value = self._raw(section, key)
        return default if value is None else value

    def get_int(self, section, key, default=None):
        return self._typed(section, key, default, int)

    def get_float(self, section, key, default=None):
        return self._typed(section, key, default, float)

    def get_bool(self, section, key, default=None):
        value = self._raw(section, key)
        if value is None:
            return default
        lowered = value.strip().lower()
        if lowered in {"true", "yes", "1", "on"}:
            return True
        if lowered in {"false", "no", "0", "off"}:
            return False
        raise ConfigError(f"[{section}] {key}: not a boolean: {value!r}")

    def get_vectors(self, section, key, default=None):
        """Parse "a,b; c,d" into an array of row vectors."""
        value = self._raw(section, key)
        if value is None:
            return default
        try:
            rows = [[float(v) for v in part.split(",")]
                    for part in value.split(";") if part.strip()]
            out = np.asarray(rows, dtype=float)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: bad vector list: {value!r}") from exc
        if out.ndim != 2:
            raise ConfigError(f"[{section}] {key}: rows differ in length")
        return out

    def get_int_list(self, section, key, default=None):
        value = self._raw(section, key)
        if value is None:
            return default
        try:
            return [int(v) for v in value.replace(";", ",").split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: bad integer list: {value!r}") from exc

    def _typed(self, section, key, default, cast):
        value = self._raw(section, key)
        if value is None:
            return default
        try:
            return cast(value)
        except ValueError as exc:
            raise ConfigError(
                f"[{section}] {key}: expected {cast.__name__}, got {value!r}") from exc

    def echo(self) -> dict:
        """Flat section.key -> value mapping for manifests."""
        return {f"{sec}.{key}": val
                for sec, body in sorted(self._sections.items())
                for key, val in sorted(body.items())}


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; unknown sections or keys fail."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    sections: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _ALLOWED:
            raise ConfigError(f"unknown config section [{section}]")
        body = {}
        for key, value in parser.items(section):
            if key not in _ALLOWED[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            choices = _CHOICES.get((section, key))
            if choices and value.strip().lower() not in choices:
                raise ConfigError(
                    f"[{section}] {key}: {value!r} not one of {sorted(choices)}")
            body[key] = value.strip()
        sections[section] = body
    return ExperimentConfig(sections)
