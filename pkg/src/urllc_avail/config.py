"""Flat ``key = value`` scenario files.

One key per line, ``#`` starts a comment. Keys follow the usual symbol names
(``P_s_t``, ``N0``, ``D_p``, ...). Powers are given in dBm and the noise
density in dBm/Hz; everything else is SI. Unknown keys are errors, so a typo
cannot silently fall back to a default.

Exactly one ``sweep`` variable is swept over ``grid``. An optional ``series``
variable adds an outer loop over ``series_grid`` (one block of rows per value).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .availability import QoSRequirement
from .channel import ChannelParams
from .modes import DelayBudget, ModeId, SystemParams, dbm_to_watt

SWEEP_VARIABLES = ("Nt", "rho", "R_cell", "D_p", "eps_max", "r")
SERIES_VARIABLES = ("Nt", "rho", "rho_c", "rho_d", "R_cell", "D_p", "D_b", "eps_max")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass(frozen=True)
class ScenarioConfig:
    modes: tuple[str, ...] = ("df_multi",)
    sweep: str = "rho"
    grid: tuple[float, ...] = (0.0,)
    series: str | None = None
    series_grid: tuple[float, ...] = ()
    # channel
    alpha: float = 3.76
    mu0_db: float = -35.3
    sigma_db: float = 8.0
    r0: float = 100.0
    # radio, powers in dBm
    P_s_t: float = 23.0
    P_b_t: float = 46.0
    N0: float = -173.0
    W_total: float = 20e6
    K: int = 10
    Nt: int = 8
    T_f: float = 1e-4
    b: float = 160.0
    # delay budget; T1/T2 unset means the split is optimized
    D_max: float = 1e-3
    D_p: float = 0.0
    D_b: float = 0.0
    T1: float | None = None
    T2: float | None = None
    # QoS
    eps_max: float = 1e-7
    P_A: float = 0.99999
    # geometry and correlation; rho_d unset means exp(-R_cell / r0)
    R_cell: float = 250.0
    rho_c: float = 0.0
    rho_d: float | None = None
    r: float = 10.0
    # sampling and output
    mc_budget: int = 10**6
    seed: int = 0
    output: str = ""

    def __post_init__(self) -> None:
        validate(self)

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    # -- conversions ----------------------------------------------------------
    def system(self) -> SystemParams:
        return SystemParams(P_s_t=dbm_to_watt(self.P_s_t), P_b_t=dbm_to_watt(self.P_b_t),
                            N0=dbm_to_watt(self.N0), W_total=self.W_total, K=self.K,
                            Nt=self.Nt, T_f=self.T_f, b=self.b)

    def channel(self) -> ChannelParams:
        return ChannelParams(self.alpha, self.mu0_db, self.sigma_db, self.r0)

    def qos(self) -> QoSRequirement:
        return QoSRequirement(self.eps_max, self.P_A)

    def budget(self) -> DelayBudget:
        return DelayBudget(self.D_max, self.D_p, self.D_b, self.T1, self.T2)

    @property
    def fixed_split(self) -> bool:
        return self.T1 is not None


_INT_KEYS = {"K", "Nt", "mc_budget", "seed"}
_OPTIONAL_FLOAT_KEYS = {"T1", "T2", "rho_d"}
_TUPLE_KEYS = {"grid", "series_grid"}


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def validate(cfg: ScenarioConfig) -> None:
    _require(len(cfg.modes) > 0, "modes", "at least one mode is required")
    for m in cfg.modes:
        _require(m in {x.value for x in ModeId}, "modes", f"unknown mode {m!r}")
    _require(len(set(cfg.modes)) == len(cfg.modes), "modes", "duplicate mode")
    _require(cfg.sweep in SWEEP_VARIABLES, "sweep",
             f"must be one of {', '.join(SWEEP_VARIABLES)}")
    _require(len(cfg.grid) > 0, "grid", "grid is empty")
    _require(all(math.isfinite(v) for v in cfg.grid), "grid", "grid values must be finite")
    _require(list(cfg.grid) == sorted(cfg.grid), "grid", "grid must be sorted ascending")
    _require(len(set(cfg.grid)) == len(cfg.grid), "grid", "grid has repeated values")
    if cfg.series is None:
        _require(len(cfg.series_grid) == 0, "series_grid", "series_grid given without series")
    else:
        _require(cfg.series in SERIES_VARIABLES, "series",
                 f"must be one of {', '.join(SERIES_VARIABLES)}")
        _require(cfg.series != cfg.sweep, "series", "series must differ from the sweep variable")
        _require(len(cfg.series_grid) > 0, "series_grid", "series_grid is empty")
    for name in ("alpha", "sigma_db", "r0", "W_total", "T_f", "b", "D_max", "R_cell", "r"):
        _require(getattr(cfg, name) > 0, name, "must be positive")
    for name in ("D_p", "D_b"):
        _require(getattr(cfg, name) >= 0, name, "must be non-negative")
    _require(cfg.K >= 1, "K", "must be at least 1")
    _require(cfg.Nt >= 1, "Nt", "must be at least 1")
    _require(0 < cfg.eps_max < 1, "eps_max", "must lie in (0, 1)")
    _require(0 < cfg.P_A < 1, "P_A", "must lie in (0, 1)")
    _require(0 <= cfg.rho_c <= 1, "rho_c", "must lie in [0, 1]")
    _require(cfg.rho_d is None or 0 <= cfg.rho_d <= 1, "rho_d", "must lie in [0, 1]")
    _require(cfg.mc_budget >= 1000, "mc_budget", "must be at least 1000")
    _require((cfg.T1 is None) == (cfg.T2 is None), "T2", "T1 and T2 must be set together")
    _require(cfg.D_max - cfg.D_p - cfg.D_b > 0, "D_max", "no transmission time left")


# ---------------------------------------------------------------------------
# text format

def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(cfg: ScenarioConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def _parse_scalar(name: str, text: str):
    text = text.strip()
    if name in _OPTIONAL_FLOAT_KEYS and text.lower() in ("", "none"):
        return None
    try:
        if name in _INT_KEYS:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(name, f"cannot parse {text!r} as a number") from None


def parse(text: str) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, _, val = (part.strip() for part in line.partition("="))
        if key == "mode":
            key = "modes"
        if key not in known:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "given twice")
        if key == "modes":
            values[key] = tuple(m.strip() for m in val.split(",") if m.strip())
        elif key in _TUPLE_KEYS:
            items = [x for x in (p.strip() for p in val.split(",")) if x]
            values[key] = tuple(_parse_scalar(key, x) for x in items)
        elif key == "series":
            values[key] = None if val.lower() in ("", "none") else val
        elif key in ("sweep", "output"):
            values[key] = val
        else:
            values[key] = _parse_scalar(key, val)
    return ScenarioConfig(**values)


def load(path: str | Path) -> ScenarioConfig:
    return parse(Path(path).read_text(encoding="utf-8"))


def dump(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(serialize(cfg), encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# built-in figure presets

T_F = 1e-4
RHO_GRID = tuple(round(0.1 * k, 1) for k in range(10))

PRESETS: dict[str, ScenarioConfig] = {
    # range vs eps_max with both links shadowed at the P_A quantile (rho = 1)
    "fig3": ScenarioConfig(modes=("d2d", "df_cellular"), sweep="eps_max",
                           grid=(1e-7, 1e-6, 1e-5, 1e-4, 1e-3), Nt=4,
                           T1=4 * T_F, T2=4 * T_F, rho_c=1.0),
    # DF cellular range vs antennas, fully correlated and independent UL/DL
    "fig4": ScenarioConfig(modes=("df_cellular",), sweep="Nt", grid=(2, 4, 8, 16, 32, 64, 128),
                           series="rho_c", series_grid=(0.0, 1.0)),
    # DF multi range vs cellular/D2D correlation
    "fig5": ScenarioConfig(modes=("df_multi",), sweep="rho", grid=RHO_GRID,
                           series="Nt", series_grid=(8, 32, 128), D_p=T_F, D_b=T_F),
    # D2D range vs cell radius with equal phases
    "fig6": ScenarioConfig(modes=("d2d", "df_multi"), sweep="R_cell",
                           grid=(100.0, 150.0, 200.0, 250.0, 300.0), Nt=32,
                           T1=5 * T_F, T2=5 * T_F),
    # DF multi at several processing delays against AF multi, macro cell
    "fig7a": ScenarioConfig(modes=("df_multi", "af_multi"), sweep="Nt", grid=(8, 16, 32, 64, 128),
                            series="D_p", series_grid=(T_F, 3 * T_F, 5 * T_F), D_b=T_F),
    # same comparison against correlation, micro cell
    "fig7b": ScenarioConfig(modes=("df_multi", "af_multi"), sweep="rho", grid=RHO_GRID,
                            series="D_p", series_grid=(T_F, 3 * T_F, 5 * T_F), D_b=T_F,
                            R_cell=100.0, Nt=8),
}
PRESETS["fig7"] = PRESETS["fig7a"]


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from "
                          + ", ".join(sorted(PRESETS))) from None
