"""Experiment configuration files, CSV emission, and run manifests.

Configs are TOML with three sections: [experiment] (id), [physics], and
[numerics].  Unknown keys are rejected so presets cannot silently drift from
the implementation.  Every run writes its CSV outputs first and then a
manifest.json (atomically) carrying the config echo, library version, wall
time, and per-output checksums.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .errors import ConfigError

MANIFEST_SCHEMA = {
    "experiment": str,
    "config": dict,
    "library_version": str,
    "wall_time_s": float,
    "outputs": list,
    "convergence": dict,
}

# physics/numerics keys accepted per experiment id
_PHYSICS_KEYS = {
    "steady": {"process", "n_bar", "kappa", "kappa_phi", "kappa_1ph", "initial",
               "target_index"},
    "sweep": {"n_bar_values", "kappa", "grid_re", "grid_im"},
    "rabi": {"kind", "n_bar", "kappa", "eps_x_over_kappa", "periods"},
    "entangle": {"kind", "n_bar", "kappa", "eps_xx_over_kappa", "horizon_factor"},
    "kerr": {"q_values", "beta_re", "beta_im", "chi"},
    "loss": {"n_bar", "kappa", "eps_x_over_kappa", "kappa_1ph_over_kappa"},
    "phase-flip-rate": {"kind", "alphas", "ratio", "kappa"},
    "adiabatic-compare": {"g_2ph", "eps_b", "kappa_b", "chi_aa", "chi_bb", "chi_ab",
                          "scale_factor", "zero_kerr"},
    "wigner": {"state", "alpha", "extent", "resolution"},
}
_NUMERICS_KEYS = {"n_max", "n_max_b", "rtol", "tol", "n_out", "method", "fit_window",
                  "t_final"}

EXPERIMENTS = tuple(sorted(_PHYSICS_KEYS))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: id, physical and numerical parameters, run options."""

    experiment: str
    physics: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    out_dir: Path = Path(".")
    jobs: int = 0            # 0 = all available cores
    verify_numeric: float = 0.0

    def __post_init__(self):
        if self.experiment not in _PHYSICS_KEYS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        unknown = set(self.physics) - _PHYSICS_KEYS[self.experiment]
        if unknown:
            raise ConfigError(
                f"unknown [physics] keys for {self.experiment}: {sorted(unknown)}"
            )
        unknown = set(self.numerics) - _NUMERICS_KEYS
        if unknown:
            raise ConfigError(f"unknown [numerics] keys: {sorted(unknown)}")
        for key in ("kappa", "kappa_phi", "kappa_1ph", "kappa_b"):
            value = self.physics.get(key)
            if value is not None and value < 0:
                raise ConfigError(f"rate {key} must be nonnegative, got {value}")
        n_max = self.numerics.get("n_max")
        if n_max is not None and n_max < 2:
            raise ConfigError("n_max must be at least 2")
        if not 0.0 <= self.verify_numeric <= 1.0:
            raise ConfigError("verify_numeric must be a fraction in [0, 1]")
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    @property
    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "physics": dict(self.physics),
            "numerics": dict(self.numerics),
            "jobs": self.jobs,
            "verify_numeric": self.verify_numeric,
        }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed TOML in {path}: {exc}") from exc
    unknown = set(raw) - {"experiment", "physics", "numerics"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    exp = raw.get("experiment", {})
    if not isinstance(exp, dict) or "id" not in exp:
        raise ConfigError("config needs an [experiment] section with an 'id' key")
    extra = set(exp) - {"id"}
    if extra:
        raise ConfigError(f"unknown [experiment] keys: {sorted(extra)}")
    return ExperimentConfig(
        experiment=exp["id"],
        physics=raw.get("physics", {}),
        numerics=raw.get("numerics", {}),
    )


def preset_path(name: str) -> Path:
    root = Path(__file__).resolve().parent.parent.parent / "presets"
    p = root / f"{name}.toml"
    if not p.exists():
        available = sorted(q.stem for q in root.glob("*.toml")) if root.exists() else []
        raise ConfigError(f"no preset {name!r}; available: {available}")
    return p


# ---------------------------------------------------------------------------
# output emission
# ---------------------------------------------------------------------------

def format_sig(value: float) -> str:
    """9 significant digits, the fixed CSV numeric format."""
    return f"{value:.9g}"


def write_csv(path, header: list[str], rows) -> int:
    """UTF-8, LF endings, header row, 9 significant digits; returns row count."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_sig(float(v)) for v in row) + "\n")
            count += 1
    return count


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def validate_manifest(doc: dict) -> None:
    for key, typ in MANIFEST_SCHEMA.items():
        if key not in doc:
            raise ConfigError(f"manifest missing key {key!r}")
        if not isinstance(doc[key], typ):
            raise ConfigError(f"manifest key {key!r} has type {type(doc[key]).__name__}, "
                              f"expected {typ.__name__}")
    for out in doc["outputs"]:
        if not {"path", "sha256", "rows"} <= set(out):
            raise ConfigError("manifest output records need path/sha256/rows")


class RunWriter:
    """Collects CSV outputs for one run and finalizes the manifest."""

    def __init__(self, config: ExperimentConfig, out_dir=None):
        from . import __version__

        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else config.out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.version = __version__
        self.stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
        self._t0 = time.perf_counter()
        self.outputs = []
        self.convergence = {}

    def csv_path(self, suffix: str = "") -> Path:
        tag = f"{self.config.experiment}{('-' + suffix) if suffix else ''}"
        base = self.out_dir / f"{tag}-{self.stamp}.csv"
        k = 1
        while base.exists():
            base = self.out_dir / f"{tag}-{self.stamp}-{k}.csv"
            k += 1
        return base

    def emit(self, header: list[str], rows, suffix: str = "") -> Path:
        path = self.csv_path(suffix)
        count = write_csv(path, header, rows)
        self.outputs.append({"path": path.name, "sha256": sha256_of(path), "rows": count})
        return path

    def note(self, **diagnostics) -> None:
        self.convergence.update(diagnostics)

    def finalize(self) -> Path:
        doc = {
            "experiment": self.config.experiment,
            "config": self.config.echo(),
            "library_version": self.version,
            "wall_time_s": round(time.perf_counter() - self._t0, 3),
            "outputs": self.outputs,
            "convergence": self.convergence,
        }
        validate_manifest(doc)
        target = self.out_dir / f"manifest-{self.config.experiment}-{self.stamp}.json"
        tmp = target.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, target)
        return target
