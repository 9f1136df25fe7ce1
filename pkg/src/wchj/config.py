"""Run-configuration files.

A run is described by a single TOML file.  Typical shape:

    scenario = "pair_torus"        # optional builtin base

    [scenario_params]              # keyword arguments of the builtin builder
    m = 512

    [system]                       # OR a fully explicit system
    entries = [ { name = "quadratic", data_lipschitz = 6.3, velocity_bound = 8.0 },
                { name = "quadratic", data_lipschitz = 6.3, velocity_bound = 8.0 } ]
      [system.coupling]
      kind = "matrix"              # or "field"
      rows = [[1.0, -1.0], [-1.0, 1.0]]
      # field form: kind = "field", name = "sin_offdiag", base = 1.0, amp = 0.5, freq = 1

    [grid]
    kind = "torus"                 # or "bounded"
    dim = 1
    m = 512
    # bounded: radius = 2.0, h = 0.001, margin = 1.0

    [initial]
    kind = "sin_pair"              # zero | sin_pair | opposite_sin | affine_pair | affine | sqrt_kink | random
    # params: amplitude, p, lip, seed

    [scheme]                       # overrides of the SchemeConfig fields
    operator = "twisted"
    quadrature = "trapezoid"
    window_multiplier = 1.5
    stride = 1
    refine = "golden"
    refine_depth = 20
    t_max = 1.0
    n_max = 8
    split_tol_factor = 10.0

    [run]
    T = 1.0
    n = 6                          # iterate: dyadic level  (or partition = [0.5, 0.5])
    ns = [0, 1, 2, 3, 4, 5, 6]     # converge: levels
    seed = 42
    ref_factor = 4
    t_probe = [0.1, 0.05, 0.025, 0.0125]
    n_fields = 12
    with_witness = false
    cfl = 0.9

    [output]
    dir = "out"
    write_fields = true

Builtin-scenario values are the defaults; explicit blocks override them.
Unknown keys anywhere are rejected so a typo cannot silently change a run.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field as dc_field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .coupling import sin_offdiag_field, validate_coupling
from .errors import ConfigError, WchjError
from .grids import BoundedGrid, GridField, TorusGrid, field_from_function
from .lagrangians import SystemSpec, catalog_entry
from .operators import SchemeConfig
from .reference import hopf_lax_affine, pair_step_exact
from .scenarios import SCENARIOS, Scenario, build_scenario, random_lipschitz_field

_TOP_KEYS = {"scenario", "scenario_params", "system", "grid", "initial", "scheme", "run", "output"}
_SYSTEM_KEYS = {"entries", "coupling"}
_COUPLING_KEYS = {"kind", "rows", "name", "base", "amp", "freq"}
_GRID_KEYS = {"kind", "dim", "m", "radius", "h", "margin"}
_INITIAL_KEYS = {"kind", "amplitude", "p", "lip", "seed", "components"}
_SCHEME_KEYS = {f.name for f in dataclasses.fields(SchemeConfig)}
_RUN_KEYS = {"T", "n", "partition", "ns", "seed", "ref_factor", "ref_slope_margin",
             "t_probe", "n_fields", "with_witness", "cfl", "audit_times", "audit_dt"}
_OUTPUT_KEYS = {"dir", "write_fields"}


@dataclass
class RunConfig:
    scenario: Scenario
    run: dict = dc_field(default_factory=dict)
    output: dict = dc_field(default_factory=dict)
    path: str = ""

    @property
    def seed(self) -> int:
        return int(self.run.get("seed", 42))


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]; allowed: {sorted(allowed)}")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw, path=path)


def parse_config(raw: dict, path: str = "<memory>") -> RunConfig:
    _check_keys(raw, _TOP_KEYS, "top level")
    run = dict(raw.get("run", {}))
    _check_keys(run, _RUN_KEYS, "run")
    output = dict(raw.get("output", {}))
    _check_keys(output, _OUTPUT_KEYS, "output")

    name = raw.get("scenario")
    if name is not None:
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; available: {sorted(SCENARIOS)}")
        params = dict(raw.get("scenario_params", {}))
        try:
            scn = build_scenario(name, **params)
        except TypeError as exc:
            raise ConfigError(f"bad scenario_params for {name!r}: {exc}") from None
        if "system" in raw or "grid" in raw or "initial" in raw:
            raise ConfigError("give either a builtin scenario or explicit system/grid/initial blocks, not both")
    else:
        scn = _explicit_scenario(raw, run)

    if "scheme" in raw:
        block = dict(raw["scheme"])
        _check_keys(block, _SCHEME_KEYS, "scheme")
        try:
            scn.cfg = dataclasses.replace(scn.cfg, **block)
        except (TypeError, WchjError) as exc:
            raise ConfigError(f"bad [scheme] block: {exc}") from None
    if "T" in run:
        scn.T = float(run["T"])
    if "ref_factor" in run:
        scn.ref_factor = int(run["ref_factor"])
    if "ref_slope_margin" in run:
        scn.ref_slope_margin = float(run["ref_slope_margin"])
    return RunConfig(scenario=scn, run=run, output=output, path=path)


def _explicit_scenario(raw: dict, run: dict) -> Scenario:
    for need in ("system", "grid", "initial"):
        if need not in raw:
            raise ConfigError(f"explicit runs need a [{need}] block (or set scenario = \"<name>\")")
    sys_block = dict(raw["system"])
    _check_keys(sys_block, _SYSTEM_KEYS, "system")
    grid_block = dict(raw["grid"])
    _check_keys(grid_block, _GRID_KEYS, "grid")
    init_block = dict(raw["initial"])
    _check_keys(init_block, _INITIAL_KEYS, "initial")

    entries = sys_block.get("entries")
    if not entries:
        raise ConfigError("[system] needs a non-empty entries list")
    comps = []
    for e in entries:
        e = dict(e)
        nm = e.pop("name", None)
        if nm is None:
            raise ConfigError("each system entry needs a name")
        try:
            comps.append(catalog_entry(nm, **e))
        except (TypeError, WchjError) as exc:
            raise ConfigError(f"bad catalog entry {nm!r}: {exc}") from None

    co = dict(sys_block.get("coupling", {}))
    _check_keys(co, _COUPLING_KEYS, "system.coupling")
    kind = co.get("kind", "matrix")
    if kind == "matrix":
        rows = co.get("rows")
        if rows is None:
            raise ConfigError("coupling kind 'matrix' needs rows = [[...], ...]")
        coupling = validate_coupling(rows)
    elif kind == "field":
        if co.get("name") != "sin_offdiag":
            raise ConfigError("the only builtin coupling field is 'sin_offdiag'")
        coupling = sin_offdiag_field(dim=int(grid_block.get("dim", 1)),
                                     base=float(co.get("base", 1.0)),
                                     amp=float(co.get("amp", 0.5)),
                                     freq=int(co.get("freq", 1)))
    else:
        raise ConfigError(f"coupling kind must be 'matrix' or 'field', got {kind!r}")
    try:
        system = SystemSpec(components=tuple(comps), coupling=coupling, label="config")
    except WchjError as exc:
        raise ConfigError(str(exc)) from None

    d = system.d
    init_kind = init_block.get("kind", "zero")
    p = float(init_block.get("p", 1.0))

    gkind = grid_block.get("kind", "torus")
    if gkind == "torus":
        grid = TorusGrid(dim=int(grid_block.get("dim", 1)), m=int(grid_block.get("m", 128)))
    elif gkind == "bounded":
        if init_kind not in ("affine_pair", "affine"):
            raise ConfigError("bounded grids need initial kind 'affine_pair' or 'affine' "
                              "(their closed forms supply out-of-domain values)")
        if init_kind == "affine_pair":
            if d != 2:
                raise ConfigError("initial kind 'affine_pair' needs exactly 2 components")
            ext = lambda t, x: pair_step_exact(t, x, p)  # noqa: E731
        else:
            if d != 1:
                raise ConfigError("initial kind 'affine' needs exactly 1 component")
            Hp = float(system.components[0].H(np.zeros((1, 1)), np.array([[p]])))
            ext = lambda t, x: np.asarray(hopf_lax_affine(p, Hp, t, np.atleast_1d(x)))[None, :]  # noqa: E731
        grid = BoundedGrid(radius=float(grid_block.get("radius", 2.0)),
                           h=float(grid_block.get("h", 1e-3)),
                           margin=float(grid_block.get("margin", 1.0)),
                           extension=ext)
    else:
        raise ConfigError(f"grid kind must be 'torus' or 'bounded', got {gkind!r}")

    u0 = _initial_field(init_kind, init_block, grid, d)
    T = float(run.get("T", 0.5))
    cfg = SchemeConfig(t_max=max(T, 0.5), n_max=10)
    return Scenario(name="config", sys=system, grid=grid, u0=u0, T=T, cfg=cfg)


def _initial_field(kind: str, block: dict, grid, d: int) -> GridField:
    amp = float(block.get("amplitude", 1.0))
    p = float(block.get("p", 1.0))

    def make(fn):
        return field_from_function(grid, fn, provenance=f"datum({kind})")

    if kind == "zero":
        return make(lambda pts: np.zeros((d, pts.shape[0])))
    if kind == "sin_pair":
        if d < 2:
            raise ConfigError("sin_pair needs d >= 2")
        def fn(pts):
            out = np.zeros((d, pts.shape[0]))
            out[-1] = amp * np.sin(2 * np.pi * pts[:, 0])
            return out
        return make(fn)
    if kind == "opposite_sin":
        if d != 2:
            raise ConfigError("opposite_sin needs d = 2")
        def fn(pts):
            s = amp * np.sin(2 * np.pi * pts[:, 0])
            return np.vstack([s, -s])
        return make(fn)
    if kind == "affine_pair":
        return make(lambda pts: pair_step_exact(0.0, pts[:, 0], p))
    if kind == "affine":
        return make(lambda pts: (p * pts[:, 0])[None, :])
    if kind == "sqrt_kink":
        def fn(pts):
            x = pts[:, 0]
            out = np.zeros((d, pts.shape[0]))
            out[-1] = amp * np.sqrt(np.abs(x - 0.5))
            return out
        return make(fn)
    if kind == "random":
        if not isinstance(grid, TorusGrid):
            raise ConfigError("random data need a torus grid")
        return random_lipschitz_field(grid, d, float(block.get("lip", 2.0)), int(block.get("seed", 0)))
    raise ConfigError(f"unknown initial kind {kind!r}")
