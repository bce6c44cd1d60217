"""TOML configuration: one flat document mirroring the scenario and scan
dataclasses field-for-field (units carried in the field names).

Missing fields fall back to the reference defaults: balanced control
powers (loss power scaled by the isotope abundance ratio so the two lines
have equal strength) and, when ``kappa`` is omitted, a calibration to a
peak index change of 1e-6.  Unknown keys are rejected with the offending
``[section].field`` named.  The emitter writes sections and keys in a
fixed order with round-trip float formatting, so serialize -> parse is
the identity and repeated runs are byte-identical.
"""

from __future__ import annotations

from dataclasses import fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .beam import GaussianBeam
from .errors import ConfigError, PhysicsError
from .experiment import GridConfig, NoiseConfig, PinholeConfig, ScanConfig
from .medium import (
    ControlLaserConfig,
    VaporCellConfig,
    VaporScenario,
    calibrate_kappa,
)

__all__ = ["load_scan_config", "scan_config_to_toml", "save_scan_config"]

_DEFAULT_CALIBRATION_TARGET = 1e-6

_INT_FIELDS = {("scan", "n_points"), ("scan.noise", "seed"), ("grid", "n")}
_BOOL_FIELDS = {("scan.pinhole", "enabled")}


def _table(section: str, value) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"[{section}] must be a table")
    return value


def _build(section: str, table, cls, defaults):
    """Instantiate ``cls`` from a TOML table over per-field defaults."""
    table = _table(section, table)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f"unknown key [{section}].{key}")
        if (section, key) in _BOOL_FIELDS:
            if not isinstance(value, bool):
                raise ConfigError(f"[{section}].{key} must be a boolean")
        elif (section, key) in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"[{section}].{key} must be an integer")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}].{key} must be a number")
        kwargs[key] = value
    try:
        return replace(defaults, **kwargs) if kwargs else defaults
    except ValueError as exc:
        raise ConfigError(f"invalid [{section}] settings: {exc}") from exc


def load_scan_config(path) -> ScanConfig:
    """Parse a TOML config file into a :class:`ScanConfig`.

    Raises :class:`ConfigError` with file/line context on syntax errors
    and with the ``[section].field`` name on schema violations.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known_sections = {"cell", "gain_control", "loss_control", "scenario",
                      "scan", "beam", "grid"}
    for key in doc:
        if key not in known_sections:
            raise ConfigError(f"{path}: unknown section [{key}]")

    cell = _build("cell", doc.get("cell", {}), VaporCellConfig, VaporCellConfig())
    gain = _build("gain_control", doc.get("gain_control", {}), ControlLaserConfig,
                  ControlLaserConfig(raman_offset_mhz=-0.1))
    loss_defaults = ControlLaserConfig(
        power_mw=100.0 * cell.fraction_87 / cell.fraction_85,
        raman_offset_mhz=+0.1,
    )
    loss = _build("loss_control", doc.get("loss_control", {}), ControlLaserConfig,
                  loss_defaults)

    scen_table = dict(doc.get("scenario", {}))
    kappa = scen_table.pop("kappa", None)
    pumping = scen_table.pop("pumping_efficiency", 0.1)
    if scen_table:
        raise ConfigError(f"unknown key [scenario].{next(iter(scen_table))}")
    try:
        scenario = VaporScenario(cell=cell, gain_control=gain, loss_control=loss,
                                 pumping_efficiency=float(pumping),
                                 kappa=1.0 if kappa is None else float(kappa))
    except ValueError as exc:
        raise ConfigError(f"invalid [scenario] settings: {exc}") from exc
    if kappa is None:
        try:
            scenario = replace(
                scenario,
                kappa=calibrate_kappa(scenario, _DEFAULT_CALIBRATION_TARGET),
            )
        except (ValueError, PhysicsError) as exc:
            raise ConfigError(
                "[scenario].kappa is missing and the scenario cannot be "
                f"auto-calibrated: {exc}"
            ) from exc

    scan_table = dict(doc.get("scan", {}))
    pinhole = _build("scan.pinhole", scan_table.pop("pinhole", {}), PinholeConfig,
                     PinholeConfig())
    noise = _build("scan.noise", scan_table.pop("noise", {}), NoiseConfig,
                   NoiseConfig())
    beam = _build("beam", doc.get("beam", {}), GaussianBeam, GaussianBeam())
    grid = _build("grid", doc.get("grid", {}), GridConfig, GridConfig())
    base = ScanConfig(scenario=scenario, pinhole=pinhole, noise=noise,
                      beam=beam, grid=grid)
    return _build("scan", scan_table, ScanConfig, base)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def scan_config_to_toml(config: ScanConfig) -> str:
    """Serialize a scan config; inverse of :func:`load_scan_config`."""
    sc = config.scenario
    sections = [
        ("cell", [(f.name, getattr(sc.cell, f.name)) for f in fields(sc.cell)]),
        ("gain_control",
         [(f.name, getattr(sc.gain_control, f.name)) for f in fields(sc.gain_control)]),
        ("loss_control",
         [(f.name, getattr(sc.loss_control, f.name)) for f in fields(sc.loss_control)]),
        ("scenario", [("pumping_efficiency", sc.pumping_efficiency),
                      ("kappa", sc.kappa)]),
        ("scan", [("freq_start_mhz", config.freq_start_mhz),
                  ("freq_stop_mhz", config.freq_stop_mhz),
                  ("n_points", config.n_points)]),
        ("scan.pinhole",
         [(f.name, getattr(config.pinhole, f.name)) for f in fields(config.pinhole)]),
        ("scan.noise",
         [(f.name, getattr(config.noise, f.name)) for f in fields(config.noise)]),
        ("beam", [(f.name, getattr(config.beam, f.name)) for f in fields(config.beam)]),
        ("grid", [(f.name, getattr(config.grid, f.name)) for f in fields(config.grid)]),
    ]
    lines = []
    for name, pairs in sections:
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {_fmt(value)}" for key, value in pairs)
        lines.append("")
    return "\n".join(lines)


def save_scan_config(config: ScanConfig, path):
    with open(path, "w", newline="") as fh:
        fh.write(scan_config_to_toml(config))
