"""Ground-truth scenario and its plain-text file format.

Scenario files are YAML (JSON is accepted as a subset). Lengths are in
metres, angles in degrees; values are converted to radians on load. See
``docs/scenario-schema.md`` for the full key list.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .exceptions import RisWaveError, ScenarioFileError
from .field import ObstacleMask
from .scene import IncidentBeamSpec, Medium, RisGeometry, direction_angle, medium_from_frequency, medium_from_wavelength


@dataclass(frozen=True)
class Scenario:
    """RIS, incident beam, user equipment (UE) and obstacles for one experiment.

    ``ue_position`` and ``ue_velocity`` are (x, z) pairs in the y = 0 plane.
    ``rss_noise_db`` is the standard deviation of the multiplicative
    log-normal noise on RSS readings (0 disables noise) and ``rss_repeats``
    the number of averaged readings per probe.
    """

    medium: Medium
    ris: RisGeometry
    incident: IncidentBeamSpec
    ue_position: tuple = (0.0, 1.0)
    ue_velocity: tuple = None
    obstacles: tuple = ()
    seed: int = 0
    rss_noise_db: float = 0.0
    rss_repeats: int = 1

    def __post_init__(self):
        ux, uz = (float(v) for v in self.ue_position)
        if not (math.isfinite(ux) and math.isfinite(uz)) or uz <= 0:
            raise ScenarioFileError("UE must lie in front of the RIS (z > 0)", field="ue_position")
        object.__setattr__(self, "ue_position", (ux, uz))
        if self.ue_velocity is not None:
            object.__setattr__(self, "ue_velocity", tuple(float(v) for v in self.ue_velocity))
        object.__setattr__(self, "obstacles", tuple(sorted(self.obstacles, key=lambda m: m.z_b)))
        if self.rss_noise_db < 0:
            raise ScenarioFileError("must be >= 0", field="rss_noise_db")
        if int(self.rss_repeats) < 1:
            raise ScenarioFileError("must be >= 1", field="rss_repeats")

    @property
    def ue_angle(self):
        return direction_angle(*self.ue_position)

    @property
    def ue_range(self):
        return math.hypot(*self.ue_position)

    @property
    def ue_point(self):
        """UE as an (x, y, z) point."""
        return np.array([self.ue_position[0], 0.0, self.ue_position[1]])

    def with_ue(self, position):
        return _replace(self, ue_position=tuple(position))

    def with_incident(self, incident):
        return _replace(self, incident=incident)

    def to_dict(self):
        """File representation (degrees, plain lists) that :func:`scenario_from_dict` reads back."""
        inc = self.incident
        out = {
            "medium": {"wavelength": self.medium.wavelength},
            "ris": {"nx": self.ris.nx, "ny": self.ris.ny, "pitch": self.ris.pitch},
            "incident": {
                "footprint_radius": _inf_out(inc.footprint_radius),
                "incidence_angle": math.degrees(inc.incidence_angle),
                "amplitude": inc.amplitude,
            },
            "ue_position": list(self.ue_position),
            "seed": self.seed,
            "rss_noise_db": self.rss_noise_db,
            "rss_repeats": self.rss_repeats,
        }
        if inc.footprint_radius_y != inc.footprint_radius:
            out["incident"]["footprint_radius_y"] = _inf_out(inc.footprint_radius_y)
        if self.ue_velocity is not None:
            out["ue_velocity"] = list(self.ue_velocity)
        if self.obstacles:
            out["obstacles"] = [
                {"z_b": m.z_b, "x_intervals": [list(iv) for iv in m.x_intervals]}
                | ({"y_intervals": [list(iv) for iv in m.y_intervals]} if m.y_intervals else {})
                for m in self.obstacles
            ]
        return out

    def save(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


def _replace(obj, **changes):
    from dataclasses import replace

    return replace(obj, **changes)


def _inf_out(v):
    return "inf" if math.isinf(v) else v


# ---------------------------------------------------------------------------
# Loading with line diagnostics


def _node_lines(node, path=(), out=None):
    """Map each key path to the 1-based line where its value starts."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            _node_lines(value_node, path + (key_node.value,), out)
            out.setdefault(path + (key_node.value,), key_node.start_mark.line + 1)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _node_lines(item, path + (i,), out)
    return out


class _Reader:
    """Typed access into the loaded mapping that reports the offending line."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def line(self, path):
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def fail(self, path, message):
        name = ".".join(str(p) for p in path) or "<root>"
        raise ScenarioFileError(message, field=name, line=self.line(path))

    def get(self, path, default=KeyError):
        cur = self.data
        for i, key in enumerate(path):
            if isinstance(key, int):
                ok = isinstance(cur, list) and key < len(cur)
            else:
                ok = isinstance(cur, dict) and key in cur
            if not ok:
                if default is KeyError:
                    self.fail(path[: i + 1], "missing required field")
                return default
            cur = cur[key]
        return cur

    def number(self, path, default=KeyError, *, positive=False, allow_inf=False, min_val=None):
        raw = self.get(path, default)
        if raw is None:
            return None
        if allow_inf and isinstance(raw, str) and raw.strip().lower() in ("inf", "infinity", ".inf"):
            return math.inf
        if isinstance(raw, str):
            # YAML 1.1 reads JSON exponents such as 150e9 as strings
            try:
                raw = float(raw)
            except ValueError:
                pass
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            self.fail(path, f"expected a number, got {raw!r}")
        val = float(raw)
        if math.isinf(val) and allow_inf and val > 0:
            return val
        if not math.isfinite(val):
            self.fail(path, f"must be finite, got {raw!r}")
        if positive and val <= 0:
            self.fail(path, f"must be > 0, got {raw!r}")
        if min_val is not None and val < min_val:
            self.fail(path, f"must be >= {min_val}, got {raw!r}")
        return val

    def integer(self, path, default=KeyError, min_val=None):
        raw = self.get(path, default)
        if isinstance(raw, bool) or not isinstance(raw, int):
            self.fail(path, f"expected an integer, got {raw!r}")
        if min_val is not None and raw < min_val:
            self.fail(path, f"must be >= {min_val}, got {raw}")
        return raw

    def pair(self, path, default=KeyError):
        raw = self.get(path, default)
        if raw is None:
            return None
        if not isinstance(raw, list) or len(raw) != 2:
            self.fail(path, f"expected a list [x, z], got {raw!r}")
        return tuple(self.number(path + (i,)) for i in range(2))

    def intervals(self, path, default=KeyError):
        raw = self.get(path, default)
        if raw is None:
            return None
        if not isinstance(raw, list) or not raw:
            self.fail(path, "expected a non-empty list of [lo, hi] pairs")
        out = []
        for i in range(len(raw)):
            lo, hi = self.pair(path + (i,))
            if hi <= lo:
                self.fail(path + (i,), f"interval needs lo < hi, got [{lo}, {hi}]")
            out.append((lo, hi))
        return tuple(out)


_TOP_KEYS = {"medium", "ris", "incident", "ue_position", "ue_velocity", "obstacles", "seed", "rss_noise_db", "rss_repeats"}


def scenario_from_dict(data, lines=None):
    """Build a :class:`Scenario` from the parsed file mapping."""
    r = _Reader(data, lines or {})
    if not isinstance(data, dict):
        r.fail((), "scenario file must contain a mapping at the top level")
    for key in data:
        if key not in _TOP_KEYS:
            r.fail((key,), "unknown field")

    med = r.get(("medium",))
    if not isinstance(med, dict):
        r.fail(("medium",), "expected a mapping with 'wavelength' or 'frequency'")
    if ("wavelength" in med) == ("frequency" in med):
        r.fail(("medium",), "give exactly one of 'wavelength' and 'frequency'")
    if "wavelength" in med:
        medium = medium_from_wavelength(r.number(("medium", "wavelength"), positive=True))
    else:
        medium = medium_from_frequency(r.number(("medium", "frequency"), positive=True))

    nx = r.integer(("ris", "nx"), min_val=2)
    ny = r.integer(("ris", "ny"), min_val=2)
    pitch = r.number(("ris", "pitch"), None, positive=True)
    ris = RisGeometry(nx, ny, medium.wavelength / 2 if pitch is None else pitch)

    w = r.number(("incident", "footprint_radius"), positive=True, allow_inf=True)
    wy = r.number(("incident", "footprint_radius_y"), None, positive=True, allow_inf=True)
    theta = r.number(("incident", "incidence_angle"), 0.0)
    if abs(theta) >= 90:
        r.fail(("incident", "incidence_angle"), f"|angle| must be < 90 degrees, got {theta}")
    power = r.number(("incident", "power"), None, positive=True)
    amp = r.number(("incident", "amplitude"), None, min_val=0.0)
    if power is not None and amp is not None:
        r.fail(("incident",), "give at most one of 'power' and 'amplitude'")
    if power is not None:
        if math.isinf(w) or (wy is not None and math.isinf(wy)):
            r.fail(("incident", "power"), "power is undefined for an infinite footprint; give 'amplitude'")
        incident = IncidentBeamSpec.with_power(w, power, math.radians(theta), wy)
    else:
        incident = IncidentBeamSpec(w, math.radians(theta), 1.0 if amp is None else amp, wy)

    ue = r.pair(("ue_position",))
    if ue[1] <= 0:
        r.fail(("ue_position",), f"UE z must be > 0, got {ue[1]}")
    vel = r.pair(("ue_velocity",), None)

    obstacles = []
    raw_obs = r.get(("obstacles",), None) or []
    if not isinstance(raw_obs, list):
        r.fail(("obstacles",), "expected a list")
    for i in range(len(raw_obs)):
        zb = r.number(("obstacles", i, "z_b"), positive=True)
        xs = r.intervals(("obstacles", i, "x_intervals"))
        ys = r.intervals(("obstacles", i, "y_intervals"), None)
        obstacles.append(ObstacleMask(zb, xs, ys))
    for i in range(1, len(obstacles)):
        if obstacles[i].z_b < obstacles[i - 1].z_b:
            r.fail(("obstacles", i, "z_b"), "obstacles must be listed by increasing z_b")

    seed = r.integer(("seed",), 0, min_val=0)
    noise = r.number(("rss_noise_db",), 0.0, min_val=0.0)
    repeats = r.integer(("rss_repeats",), 1, min_val=1)
    return Scenario(medium, ris, incident, ue, vel, tuple(obstacles), seed, noise, repeats)


def load_scenario(path):
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioFileError
        With the offending line and field for any schema violation.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioFileError(f"cannot read scenario file: {exc}") from exc
    return loads_scenario(text)


def loads_scenario(text):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioFileError(f"not valid YAML/JSON: {getattr(exc, 'problem', exc)}",
                                line=None if mark is None else mark.line + 1) from exc
    if node is None:
        raise ScenarioFileError("scenario file is empty", line=1)
    lines = _node_lines(node)
    try:
        return scenario_from_dict(data, lines)
    except ScenarioFileError:
        raise
    except RisWaveError as exc:
        # value-level checks in the domain types; no finer position available
        raise ScenarioFileError(str(exc)) from exc
