"""TOML scenario configuration with strict key checking.

Example::

    [sensor]            # optional overrides of the calibrated model
    bandwidth = 1300.0
    [sensor.fault]      # parameter multipliers, 1.0 = healthy
    K = 1.25

    [code]
    order = 6
    chip_rate = 100.0
    # taps = [6, 5]
    # seed = 63

    [chain]
    carrier_freq = 1000.0

    [[perturbation]]
    amplitude = 0.05    # g
    frequency = 1003.0  # Hz
    phase = 0.0         # rad

    [run]
    sequences = 1
    seed = 0
"""

import copy
import math
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import mls, sensor, signalchain


class ConfigError(ValueError):
    pass


_SINE_KEYS = {"amplitude": float, "frequency": float, "phase": float}

SCHEMA = {
    "sensor": {
        "M": float, "D": float, "K": float, "G": float, "k_c": float,
        "bandwidth": float,
        "fault": {"M": float, "D": float, "K": float, "G": float, "k_c": float},
    },
    "code": {"order": int, "taps": list, "seed": int, "chip_rate": float},
    "chain": {
        "carrier_freq": float, "carrier_shape": str, "lp2_cutoff": float, "lp2_order": int,
        "operational_cutoff": float, "operational_order": int,
        "test_cutoff": float, "test_order": int,
        "demod_cutoff": float, "demod_order": int, "demod_phase_error": float,
        "internal_rate": float, "output_rate": float, "stimulus_amplitude": float,
    },
    "perturbation": [_SINE_KEYS],
    "measurand": [_SINE_KEYS],
    "run": {
        "sequences": int, "warmup": int, "seed": int, "noise_rms": float, "encoded": bool,
        "adaptive": bool, "base_order": int, "max_order": int,
        "cov_tolerance": float, "cor_threshold": float, "average": bool,
        "average_sequences": int, "perturbation_band": float,
    },
}

DEFAULTS = {
    "sensor": {"bandwidth": sensor.PHYSICAL_BANDWIDTH, "fault": {}},
    "code": {"order": 6, "chip_rate": 100.0},
    "chain": {},
    "perturbation": [],
    "measurand": [],
    "run": {
        "sequences": 1, "warmup": 1, "seed": 0, "noise_rms": 0.0, "encoded": True,
        "adaptive": True, "max_order": 10, "cov_tolerance": 0.08, "cor_threshold": 0.97,
        "average": False, "average_sequences": 4,
    },
}


def _check(node, schema, path):
    if isinstance(schema, list):
        if not isinstance(node, list):
            raise ConfigError(f"{path}: expected an array of tables")
        for i, item in enumerate(node):
            _check(item, schema[0], f"{path}[{i}]")
        return
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected a table")
    for key, value in node.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {where!r}")
        expected = schema[key]
        if isinstance(expected, (dict, list)):
            _check(value, expected, where)
        elif expected is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{where}: expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{where}: must be finite")
        elif expected is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
        elif not isinstance(value, expected):
            raise ConfigError(f"{where}: expected {expected.__name__}, got {value!r}")


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse(text, source="<config>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = f"{source}: {exc}"
        m = re.search(r"line (\d+)", str(exc))
        lines = text.splitlines()
        if m and 0 < int(m.group(1)) <= len(lines):
            msg += f"\n    {lines[int(m.group(1)) - 1]}"
        raise ConfigError(msg) from None
    try:
        _check(data, SCHEMA, "")
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return _merge(DEFAULTS, data)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))


def default():
    return copy.deepcopy(DEFAULTS)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(cfg, assignment):
    """Apply ``dotted.key=value``; array entries are addressed by index."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not KEY=VALUE")
    key, _, raw = assignment.partition("=")
    parts = key.strip().split(".")
    value = _parse_value(raw.strip())
    cfg = copy.deepcopy(cfg)
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if isinstance(node, list):
            idx = int(part)
            while len(node) <= idx:
                node.append({})
            node = node[idx]
        else:
            if part not in node:
                node[part] = [] if part in ("perturbation", "measurand") else {}
            node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        raise ConfigError(f"override {key!r} must address a field")
    node[last] = value
    _check({k: v for k, v in cfg.items()}, SCHEMA, "")
    return cfg


def build_model(cfg):
    sec = cfg["sensor"]
    model = sensor.default_model(float(sec.get("bandwidth", sensor.PHYSICAL_BANDWIDTH)))
    overrides = {k: float(sec[k]) for k in ("M", "D", "K", "G", "k_c") if k in sec}
    if overrides:
        from dataclasses import replace

        model = replace(model, **overrides)
    return model


def build_fault(cfg):
    return sensor.FaultScenario(**{k: float(v) for k, v in cfg["sensor"].get("fault", {}).items()})


def build_code(cfg, order=None):
    sec = cfg["code"]
    base = int(sec["order"])
    order = base if order is None else order
    # user taps/seed only describe the configured order
    taps = sec.get("taps") if order == base else None
    seed = sec.get("seed") if order == base else None
    try:
        return mls.make_code(order, float(sec["chip_rate"]), taps, seed)
    except mls.LfsrError as exc:
        raise ConfigError(f"code: {exc}") from None


def build_chain(cfg):
    sec = dict(cfg["chain"])
    kw = {}
    for name in ("carrier_freq", "carrier_shape", "lp2_cutoff", "lp2_order",
                 "demod_phase_error", "internal_rate", "output_rate", "stimulus_amplitude"):
        if name in sec:
            kw[name] = sec[name]
    defaults = signalchain.ChainConfig.__dataclass_fields__
    for prefix, field_name in (("operational", "operational_filter"), ("test", "test_filter"),
                               ("demod", "demod_lowpass")):
        base = defaults[field_name].default
        kw[field_name] = signalchain.FilterSpec(
            base.kind,
            float(sec.get(f"{prefix}_cutoff", base.cutoff)),
            int(sec.get(f"{prefix}_order", base.order)),
        )
    kw["chip_rate"] = float(cfg["code"]["chip_rate"])
    try:
        return signalchain.ChainConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"chain: {exc}") from None


def _sines(items):
    return tuple(
        signalchain.Sine(float(c.get("amplitude", 0.0)), float(c.get("frequency", 0.0)),
                         float(c.get("phase", 0.0)))
        for c in items
    )


def build_scenario(cfg, order=None):
    run = cfg["run"]
    try:
        return signalchain.Scenario(
            code=build_code(cfg, order),
            config=build_chain(cfg),
            model=build_model(cfg),
            fault=build_fault(cfg),
            measurand=_sines(cfg["measurand"]),
            perturbation=_sines(cfg["perturbation"]),
            encoded=bool(run["encoded"]),
            noise_rms=float(run["noise_rms"]),
            seed=int(run["seed"]),
            n_sequences=int(run["average_sequences"]) if run["average"] else 1,
            warmup_sequences=int(run["warmup"]),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
