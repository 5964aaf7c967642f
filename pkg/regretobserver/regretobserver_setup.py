import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from regretobserver.tools import ro_bench
from regretobserver.tools import ro_disturbance
from regretobserver.tools import ro_errors

logger = logging.getLogger("ro_setup")

BENCH_SETUP_SCHEMA = [
    {
        "bs_name": "system",
        "bs_type": "string_short",
        "bs_default": "NN4",
        "bs_group": "System",
        "bs_description": "Catalog name (NN4, AC1, AC2, AC3), a comma-separated list of them, or a path to a .sys file",
    },
    {
        "bs_name": "ts",
        "bs_type": "float",
        "bs_default": 0.005,
        "bs_group": "System",
        "bs_description": "Sampling period in seconds",
    },
    {
        "bs_name": "horizon",
        "bs_type": "int",
        "bs_default": 10,
        "bs_group": "System",
        "bs_description": "Prediction horizon T",
    },
    {
        "bs_name": "discretization",
        "bs_type": "string_short",
        "bs_default": "zoh",
        "bs_group": "System",
        "bs_description": "zoh or euler",
    },
    {
        "bs_name": "patterns",
        "bs_type": "string_list",
        "bs_default": [k.value for k in ro_disturbance.ALL_PATTERNS],
        "bs_group": "Disturbances",
        "bs_description": "Comma-separated patterns: gaussian, uniform-half, uniform-full, const, sin, sawtooth, step, stairs, worst",
    },
    {
        "bs_name": "waveform_clock",
        "bs_type": "string_short",
        "bs_default": "seconds",
        "bs_group": "Disturbances",
        "bs_description": "Time axis of the sin and sawtooth patterns: seconds (t·ts) or samples (t)",
    },
    {
        "bs_name": "realizations",
        "bs_type": "int",
        "bs_default": 1000,
        "bs_group": "Disturbances",
        "bs_description": "Draws averaged per stochastic pattern",
    },
    {
        "bs_name": "seed",
        "bs_type": "int",
        "bs_default": 0,
        "bs_group": "Disturbances",
        "bs_description": "Base seed of the random substreams",
    },
    {
        "bs_name": "hv",
        "bs_type": "float",
        "bs_default": 1.0,
        "bs_group": "Noise",
        "bs_description": "Measurement-noise ellipsoid shape, Hv = hv*I",
    },
    {
        "bs_name": "hw",
        "bs_type": "float",
        "bs_default": 1.0,
        "bs_group": "Noise",
        "bs_description": "Disturbance ellipsoid shape, Hw = hw*I",
    },
    {
        "bs_name": "sigma_v",
        "bs_type": "float",
        "bs_default": 1.0,
        "bs_group": "Noise",
        "bs_description": "Measurement-noise covariance, Sigma_v = sigma_v*I",
    },
    {
        "bs_name": "sigma_w",
        "bs_type": "float",
        "bs_default": 1.0,
        "bs_group": "Noise",
        "bs_description": "Disturbance covariance, Sigma_w = sigma_w*I",
    },
    {
        "bs_name": "q",
        "bs_type": "float",
        "bs_default": 1.0,
        "bs_group": "Noise",
        "bs_description": "Error weight, Q_t = q*I",
    },
    {
        "bs_name": "workers",
        "bs_type": "int",
        "bs_default": 4,
        "bs_group": "Execution",
        "bs_description": "Concurrent evaluation jobs",
    },
    {
        "bs_name": "max_newton",
        "bs_type": "int",
        "bs_default": 500,
        "bs_group": "Solver",
        "bs_description": "Newton step budget of each SDP",
    },
    {
        "bs_name": "sdp_trace",
        "bs_type": "string_short",
        "bs_default": "",
        "bs_group": "Solver",
        "bs_description": "Write a per-iteration CSV trace of the SDP solver to this path (debug)",
    },
]

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(item: Dict[str, Any], value: Any) -> Any:
    t = item["bs_type"]
    name = item["bs_name"]
    try:
        if t == "int":
            if isinstance(value, bool):
                raise ValueError("boolean for an integer")
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("fractional value")
            return int(value)
        if t == "float":
            return float(value)
        if t == "bool":
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in _TRUE:
                return True
            if s in _FALSE:
                return False
            raise ValueError("not a boolean")
        if t == "string_list":
            if isinstance(value, str):
                return [x.strip() for x in value.split(",") if x.strip()]
            return [str(x).strip() for x in value]
        return str(value).strip()
    except (TypeError, ValueError) as e:
        raise ro_errors.BadConfig("%s: cannot read %r as %s (%s)" % (name, value, t, e))


def setup_mixing_procedure(schema: List[Dict[str, Any]], overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Schema defaults, then overrides on top, every value coerced by bs_type."""
    known = {item["bs_name"]: item for item in schema}
    setup = {name: item["bs_default"] for name, item in known.items()}
    for k, v in (overrides or {}).items():
        if k not in known:
            raise ro_errors.BadConfig("unknown setting %r, known: %s" % (k, ", ".join(known)))
        setup[k] = _coerce(known[k], v)
    return setup


def parse_config_text(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ro_errors.BadConfig("line %d: expected 'key = value', got %r" % (lineno, raw.strip()))
        k, v = s.split("=", 1)
        k = k.strip()
        if not k:
            raise ro_errors.BadConfig("line %d: empty key" % lineno)
        out[k] = v.strip().strip('"').strip("'")
    return out


def read_config_file(path) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ro_errors.BadConfig("cannot read config %s: %s" % (path, e))
    return parse_config_text(text)


def bench_config_from_setup(setup: Dict[str, Any], system: Optional[str] = None) -> ro_bench.BenchConfig:
    kw = dict(setup)
    if system is not None:
        kw["system"] = system
    kw["patterns"] = [ro_disturbance.parse_pattern(p) for p in kw["patterns"]]
    try:
        kw["discretization"] = ro_bench.Discretization(str(kw["discretization"]).lower())
    except ValueError:
        raise ro_errors.BadConfig("discretization must be zoh or euler, got %r" % kw["discretization"])
    try:
        kw["waveform_clock"] = ro_bench.WaveformClock(str(kw["waveform_clock"]).lower())
    except ValueError:
        raise ro_errors.BadConfig("waveform_clock must be seconds or samples, got %r" % kw["waveform_clock"])
    return ro_bench.BenchConfig(**kw)


def load_bench_config(path=None, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """File values first, then overrides (command-line flags)."""
    merged: Dict[str, Any] = {}
    if path:
        merged.update(read_config_file(path))
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    setup = setup_mixing_procedure(BENCH_SETUP_SCHEMA, merged)
    logger.debug("bench setup: %s", setup)
    return setup
