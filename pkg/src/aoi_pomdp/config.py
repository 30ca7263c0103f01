"""
Experiment configuration files.

Configurations are TOML documents with the sections ``system``, ``channel``,
``cost``, ``solver``, ``simulation`` and ``output``. Matrices are nested
arrays in row-major order; unknown keys are rejected. See
``data/paper-section-5.toml`` for a complete example.
"""

import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ChannelModel
from .errors import NumericalError
from .lti import LtiModel
from .model import DEFAULT_ENERGY_FRESH, DEFAULT_ENERGY_RETRANSMIT, CostModel

BUNDLED = ("paper-section-5",)

SCHEMA = {
    "system": {"A": True, "C": True, "R_w": True, "R_v": True, "Sigma0": True, "x_hat0": False, "P0": False},
    "channel": {"Tc": True, "q": True, "lambda": True, "n_r": True, "initial_belief": False, "matrices": False},
    "cost": {"energy_fresh": False, "energy_retransmit": False, "terminal": False},
    "solver": {"horizon": True, "resolution": False},
    "simulation": {"runs": False, "seed": False, "burn_in": False},
    "output": {"directory": False, "formats": False},
}
OUTPUT_FORMATS = ("csv", "svg")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    lti: LtiModel
    channel: ChannelModel
    cost: CostModel
    horizon: int
    resolution: int
    runs: int
    seed: int
    burn_in: int
    initial_belief: np.ndarray
    x_hat0: np.ndarray
    P0: np.ndarray
    matrices: dict
    channel_name: str
    out_dir: str
    formats: tuple
    config_hash: str
    source: str


def _number(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    return float(value)


def _matrix(key, value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(key, "expected a matrix written as a list of rows")
    width = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != width:
            raise ConfigError(key, f"row {i} has {len(row)} entries, expected {width}")
        rows.append([_number(f"{key}[{i}]", v) for v in row])
    return np.array(rows)


def _vector(key, value, length=None):
    if not isinstance(value, list):
        raise ConfigError(key, "expected a list of numbers")
    vec = np.array([_number(f"{key}[{i}]", v) for i, v in enumerate(value)])
    if length is not None and len(vec) != length:
        raise ConfigError(key, f"expected {length} entries, got {len(vec)}")
    return vec


def _integer(key, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(key, f"must be at least {minimum}")
    return value


def _check_keys(doc):
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
    for section, keys in SCHEMA.items():
        for key, required in keys.items():
            if required and key not in doc.get(section, {}):
                raise ConfigError(f"{section}.{key}", "missing required key")


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _domain(key, build):
    try:
        return build()
    except (ConfigError, NumericalError):
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from exc


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"{source}: {exc}") from exc
    _check_keys(doc)

    sys_ = doc["system"]
    lti = _domain(
        "system",
        lambda: LtiModel(*(_matrix(f"system.{k}", sys_[k]) for k in ("A", "C", "R_w", "R_v", "Sigma0"))),
    )
    x_hat0 = _vector("system.x_hat0", sys_["x_hat0"], lti.n) if "x_hat0" in sys_ else None
    P0 = _matrix("system.P0", sys_["P0"]) if "P0" in sys_ else None
    if P0 is not None and P0.shape != (lti.n, lti.n):
        raise ConfigError("system.P0", f"has shape {P0.shape}, expected {(lti.n, lti.n)}")

    ch = doc["channel"]
    matrices = {}
    for name, value in ch.get("matrices", {}).items():
        matrices[name] = _matrix(f"channel.matrices.{name}", value)
    if isinstance(ch["Tc"], str):
        if ch["Tc"] not in matrices:
            raise ConfigError("channel.Tc", f"refers to unknown matrix {ch['Tc']!r}")
        channel_name, Tc = ch["Tc"], matrices[ch["Tc"]]
    else:
        channel_name, Tc = "config", _matrix("channel.Tc", ch["Tc"])
    n_c = Tc.shape[0]
    q = _vector("channel.q", ch["q"], n_c)
    n_r = _integer("channel.n_r", ch["n_r"], 1)
    channel = _domain("channel", lambda: ChannelModel(Tc, q, _number("channel.lambda", ch["lambda"]), n_r))
    for name, T in matrices.items():
        _domain(f"channel.matrices.{name}", lambda: channel.with_matrix(T))
    initial_belief = None
    if "initial_belief" in ch and ch["initial_belief"] != "stationary":
        initial_belief = _vector("channel.initial_belief", ch["initial_belief"], n_c)
        if np.any(initial_belief < 0) or abs(initial_belief.sum() - 1.0) > 1e-9:
            raise ConfigError("channel.initial_belief", "must be a probability vector")

    cs = doc.get("cost", {})
    e_fresh = _vector("cost.energy_fresh", cs["energy_fresh"], n_c) if "energy_fresh" in cs else None
    e_retx = _vector("cost.energy_retransmit", cs["energy_retransmit"], n_c) if "energy_retransmit" in cs else None
    energy = None
    if e_fresh is not None or e_retx is not None:
        e_fresh = np.full(n_c, DEFAULT_ENERGY_FRESH) if e_fresh is None else e_fresh
        e_retx = np.full(n_c, DEFAULT_ENERGY_RETRANSMIT) if e_retx is None else e_retx
        energy = np.column_stack([e_retx, e_fresh])
    terminal = cs.get("terminal", "trace")
    terminal = None if terminal == "trace" else _vector("cost.terminal", terminal, n_r + 1)
    cost = _domain("cost", lambda: CostModel.from_lti(lti, n_c, n_r, energy=energy, terminal_trace_table=terminal))

    sv = doc["solver"]
    horizon = _integer("solver.horizon", sv["horizon"], 1)
    resolution = _integer("solver.resolution", sv.get("resolution", 100), 1)

    sim = doc.get("simulation", {})
    runs = _integer("simulation.runs", sim.get("runs", 100), 1)
    seed = _integer("simulation.seed", sim.get("seed", 0), 0)
    burn_in = _integer("simulation.burn_in", sim.get("burn_in", 50), 0)
    if burn_in >= horizon:
        raise ConfigError("simulation.burn_in", f"must be smaller than solver.horizon ({horizon})")

    out = doc.get("output", {})
    out_dir = out.get("directory", "out")
    if not isinstance(out_dir, str):
        raise ConfigError("output.directory", "expected a string")
    formats = out.get("formats", list(OUTPUT_FORMATS))
    if not isinstance(formats, list) or any(f not in OUTPUT_FORMATS for f in formats):
        raise ConfigError("output.formats", f"expected a list drawn from {list(OUTPUT_FORMATS)}")

    return ExperimentConfig(
        lti=lti,
        channel=channel,
        cost=cost,
        horizon=horizon,
        resolution=resolution,
        runs=runs,
        seed=seed,
        burn_in=burn_in,
        initial_belief=initial_belief,
        x_hat0=x_hat0,
        P0=P0,
        matrices=matrices,
        channel_name=channel_name,
        out_dir=out_dir,
        formats=tuple(formats),
        config_hash=config_hash(doc),
        source=source,
    )


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("aoi_pomdp") / "data" / f"{name}.toml"))


def load_config(path) -> ExperimentConfig:
    """Read a config file; a bundled name such as ``paper-section-5`` is also accepted."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_config_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))
