"""Experiment configuration: a closed-key JSON document.

The schema is deliberately strict so that configs double as archival
records: every key is known, unknown keys are rejected, and parse ->
serialize -> parse is the identity.
"""

import json
import math
import os
from dataclasses import dataclass

from .errors import ConfigError
from .modal import Indicator, Lifting, ModeCombination, assemble_boundary, assemble_internal
from .modal import actuator_coefficients, actuator_norms_sq
from .saturation import SaturationLevel
from .simulate import SimConfig
from .spectral import (
    BoundaryCondition,
    OperatorParams,
    eigen_clamped,
    eigen_closed_form,
    unstable_count,
)

_TOP_KEYS = {
    "bc",
    "lambda",
    "length",
    "delta",
    "nu",
    "ell",
    "actuators",
    "poles",
    "J",
    "dt",
    "T",
    "initial",
    "seed",
    "output",
}
_REQUIRED = {"bc", "lambda", "length", "actuators", "J", "dt", "T", "initial"}

_BC_NAMES = {
    "clamped": BoundaryCondition.CLAMPED,
    "hinged": BoundaryCondition.HINGED,
    "neumann_ch": BoundaryCondition.NEUMANN_CH,
}


@dataclass(frozen=True)
class ExperimentConfig:
    bc: BoundaryCondition
    lam: float
    length: float
    delta: float
    nu: float
    ell: float
    actuators: tuple
    poles: tuple | None
    J: int
    dt: float
    T: float
    initial: object
    seed: int
    output_dir: str
    output_prefix: str

    @property
    def boundary_mode(self):
        return len(self.actuators) == 0

    def level(self):
        return SaturationLevel(self.ell)

    def sim_config(self):
        return SimConfig(
            J=self.J,
            dt=self.dt,
            T=self.T,
            delta=self.delta,
            nu=self.nu,
            initial=self.initial,
        )


def _require_number(doc, key, minimum=None, strict=False):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    value = float(value)
    if minimum is not None:
        if strict and not value > minimum:
            raise ConfigError(f"{key} must be > {minimum}, got {value}")
        if not strict and not value >= minimum:
            raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _parse_actuator(entry):
    if not isinstance(entry, dict):
        raise ConfigError(f"actuator entries must be objects, got {entry!r}")
    kind = entry.get("kind")
    if kind == "indicator":
        extra = set(entry) - {"kind", "a", "b"}
        if extra:
            raise ConfigError(f"unknown actuator keys {sorted(extra)}")
        try:
            return Indicator(float(entry["a"]), float(entry["b"]))
        except KeyError as exc:
            raise ConfigError(f"indicator actuator missing key {exc}")
        except ValueError as exc:
            raise ConfigError(str(exc))
    if kind == "modes":
        extra = set(entry) - {"kind", "coefficients"}
        if extra:
            raise ConfigError(f"unknown actuator keys {sorted(extra)}")
        coeffs = entry.get("coefficients")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("mode actuator needs a nonempty coefficient list")
        return ModeCombination([float(c) for c in coeffs])
    raise ConfigError(f"unknown actuator kind {kind!r}")


def _parse_initial(entry):
    if not isinstance(entry, dict):
        raise ConfigError("initial must be an object with 'modal' or 'preset'")
    if "modal" in entry:
        extra = set(entry) - {"modal"}
        if extra:
            raise ConfigError(f"unknown initial keys {sorted(extra)}")
        modal = entry["modal"]
        if not isinstance(modal, list) or not modal:
            raise ConfigError("initial.modal must be a nonempty list")
        return tuple(float(c) for c in modal)
    if "preset" in entry:
        extra = set(entry) - {"preset", "amplitude"}
        if extra:
            raise ConfigError(f"unknown initial keys {sorted(extra)}")
        if "amplitude" not in entry:
            raise ConfigError("initial.preset needs an amplitude")
        return (str(entry["preset"]), float(entry["amplitude"]))
    raise ConfigError("initial must carry either 'modal' or 'preset'")


def parse_config(doc):
    """Validate a JSON document (already loaded) into an ExperimentConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED - set(doc)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")

    bc_name = doc["bc"]
    if bc_name not in _BC_NAMES:
        raise ConfigError(f"bc must be one of {sorted(_BC_NAMES)}, got {bc_name!r}")

    lam = _require_number(doc, "lambda", minimum=0.0, strict=True)
    length = _require_number(doc, "length", minimum=0.0, strict=True)
    delta = _require_number(doc, "delta") if "delta" in doc else 0.0
    nu = _require_number(doc, "nu") if "nu" in doc else 0.0
    if delta < 0 or nu < 0:
        raise ConfigError("delta and nu must be >= 0")

    ell_raw = doc.get("ell", "inf")
    if ell_raw == "inf":
        ell = math.inf
    else:
        if isinstance(ell_raw, bool) or not isinstance(ell_raw, (int, float)):
            raise ConfigError(f"ell must be a positive number or 'inf', got {ell_raw!r}")
        ell = float(ell_raw)
        if not ell > 0:
            raise ConfigError(f"ell must be > 0, got {ell}")

    if not isinstance(doc["actuators"], list):
        raise ConfigError("actuators must be a list (empty selects boundary actuation)")
    actuators = tuple(_parse_actuator(a) for a in doc["actuators"])

    poles_raw = doc.get("poles")
    poles = None
    if poles_raw is not None:
        if not isinstance(poles_raw, list) or not poles_raw:
            raise ConfigError("poles must be null or a nonempty list")
        poles = tuple(float(p) for p in poles_raw)

    J = doc["J"]
    if isinstance(J, bool) or not isinstance(J, int) or J < 1:
        raise ConfigError(f"J must be a positive integer, got {J!r}")
    dt = _require_number(doc, "dt", minimum=0.0, strict=True)
    T = _require_number(doc, "T", minimum=0.0)

    initial = _parse_initial(doc["initial"])
    if isinstance(initial[0], float) and len(initial) != J:
        raise ConfigError(f"initial.modal must hold J = {J} coefficients")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    output = doc.get("output", {"directory": ".", "prefix": "experiment"})
    if not isinstance(output, dict) or set(output) - {"directory", "prefix"}:
        raise ConfigError("output must be an object with 'directory' and 'prefix'")
    out_dir = str(output.get("directory", "."))
    out_prefix = str(output.get("prefix", "experiment"))

    if len(actuators) == 0 and _BC_NAMES[bc_name] != BoundaryCondition.CLAMPED:
        raise ConfigError("boundary actuation (empty actuators) requires clamped bc")
    if len(actuators) == 0 and (delta != 0.0 or nu != 0.0):
        raise ConfigError("boundary actuation supports the linear dynamics only")

    return ExperimentConfig(
        bc=_BC_NAMES[bc_name],
        lam=lam,
        length=length,
        delta=delta,
        nu=nu,
        ell=ell,
        actuators=actuators,
        poles=poles,
        J=J,
        dt=dt,
        T=T,
        initial=initial,
        seed=seed,
        output_dir=out_dir,
        output_prefix=out_prefix,
    )


def load_config(path):
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    cfg = parse_config(doc)
    seed_override = os.environ.get("SATSTAB_SEED")
    if seed_override is not None:
        try:
            cfg = replace_seed(cfg, int(seed_override))
        except ValueError:
            raise ConfigError(f"SATSTAB_SEED must be an integer, got {seed_override!r}")
    return cfg


def replace_seed(cfg, seed):
    import dataclasses

    return dataclasses.replace(cfg, seed=seed)


def serialize_config(cfg):
    """Canonical JSON document for an ExperimentConfig."""
    actuators = []
    for shape in cfg.actuators:
        if isinstance(shape, Indicator):
            actuators.append({"kind": "indicator", "a": shape.a, "b": shape.b})
        else:
            actuators.append({"kind": "modes", "coefficients": list(shape.coefficients)})
    if isinstance(cfg.initial[0], str):
        initial = {"preset": cfg.initial[0], "amplitude": cfg.initial[1]}
    else:
        initial = {"modal": list(cfg.initial)}
    return {
        "bc": cfg.bc.value,
        "lambda": cfg.lam,
        "length": cfg.length,
        "delta": cfg.delta,
        "nu": cfg.nu,
        "ell": "inf" if math.isinf(cfg.ell) else cfg.ell,
        "actuators": actuators,
        "poles": None if cfg.poles is None else list(cfg.poles),
        "J": cfg.J,
        "dt": cfg.dt,
        "T": cfg.T,
        "initial": initial,
        "seed": cfg.seed,
        "output": {"directory": cfg.output_dir, "prefix": cfg.output_prefix},
    }


def build_eigen(cfg):
    params = OperatorParams(cfg.lam, cfg.length)
    if cfg.bc == BoundaryCondition.CLAMPED:
        return eigen_clamped(params, cfg.J)
    return eigen_closed_form(params, cfg.bc, cfg.J)


def build_modal(cfg, es):
    """Modal system plus the unstable split for this configuration."""
    split = unstable_count(es)
    if cfg.boundary_mode:
        ms = assemble_boundary(es, Lifting(cfg.length), split.n)
    else:
        coeffs = actuator_coefficients(es, list(cfg.actuators))
        norms = actuator_norms_sq(es, list(cfg.actuators))
        ms = assemble_internal(es, coeffs, split.n, shape_norms_sq=norms)
    return ms, split
