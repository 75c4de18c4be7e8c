"""Two-phase hierarchical RIS-assisted localization.

Phase 1 halves the angular field of view per level with two widened
steering beams; Phase 2 halves the distance range along the detected
direction with two range probes whose covered sub-ranges overlap. Every
level costs exactly two RSS scans.

RSS probes are simulated with :func:`~riswave.field.propagate_direct` (or
through the scenario obstacles when there are any).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_int, check_positive, check_scalar
from .exceptions import InvalidArgumentError, ResolutionLimitError, SearchFailureError
from .field import field_through_obstacles, propagate_direct, reflect
from .metrics import gaussian_design
from .phase import range_sheet_phase, steering_phase
from .scene import IncidentBeamSpec, incident_field_on_ris

# Sources weaker than this fraction of the peak amplitude are skipped in RSS sums.
RSS_AMPLITUDE_CUTOFF = 1e-8


@dataclass(frozen=True)
class PolarGrid:
    """Search area: angles ``[theta_min, theta_max]`` (rad) and ranges ``[0, d_max]`` (m)."""

    theta_min: float
    theta_max: float
    d_max: float

    def __post_init__(self):
        lo = check_scalar(self.theta_min, "theta_min", min_val=-math.pi / 2, max_val=math.pi / 2)
        hi = check_scalar(self.theta_max, "theta_max", min_val=-math.pi / 2, max_val=math.pi / 2)
        if not lo < hi:
            raise InvalidArgumentError("theta_min must be < theta_max")
        check_positive(self.d_max, "d_max")

    @classmethod
    def from_degrees(cls, fov_deg, d_max):
        return cls(math.radians(fov_deg[0]), math.radians(fov_deg[1]), d_max)

    @property
    def fov(self):
        return self.theta_max - self.theta_min

    def root_angle(self):
        return AngularSector(self.theta_min, self.theta_max, 0)

    def root_range(self):
        return RangeSector(0.0, self.d_max, 0)


@dataclass(frozen=True)
class AngularSector:
    lo: float
    hi: float
    level: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidArgumentError(f"empty angular sector [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, value, tol=0.0):
        return self.lo - tol <= value <= self.hi + tol

    def split(self):
        """The two half-sectors of the next level, lower angles first."""
        m = self.center
        return AngularSector(self.lo, m, self.level + 1), AngularSector(m, self.hi, self.level + 1)


@dataclass(frozen=True)
class RangeSector:
    lo: float
    hi: float
    level: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidArgumentError(f"empty range sector [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def center(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, value, tol=0.0):
        return self.lo - tol <= value <= self.hi + tol

    def split(self, overlap):
        """Near and far halves, each extended past the midpoint by ``overlap * width``.

        Extensions are clipped to the parent so children stay nested.
        """
        m = self.center
        ext = overlap * self.width
        return (
            RangeSector(self.lo, min(self.hi, m + ext), self.level + 1),
            RangeSector(max(self.lo, m - ext), self.hi, self.level + 1),
        )


@dataclass
class ScanRecord:
    phase: str
    level: int
    index: int
    descriptor: str
    rss: float
    sector: tuple


@dataclass
class SearchState:
    """Progress of a hierarchical search.

    ``scans`` counts every RSS probe, including those carried over from an
    earlier phase.
    """

    phase: str = "angle"
    sector: object = None
    level: int = 0
    scans: int = 0
    log: list = field(default_factory=list)

    def record(self, phase, level, index, descriptor, rss, sector):
        self.scans += 1
        self.log.append(ScanRecord(phase, level, index, descriptor, float(rss), (sector.lo, sector.hi)))


@dataclass(frozen=True)
class LocalizationResult:
    theta: float
    range: float
    angular_sector: AngularSector
    range_sector: RangeSector
    angular_resolution: float
    radial_resolution: float
    scans: int
    log: tuple = ()
    time: float = None

    def contains(self, theta, r):
        return self.angular_sector.contains(theta) and self.range_sector.contains(r)


# ---------------------------------------------------------------------------
# Resolution law


def angular_resolution(grid, level):
    return grid.fov / 2 ** level


def radial_resolution(d_max, level):
    """Nominal (pre-overlap) Phase-2 resolution after ``level`` levels."""
    return d_max / 2 ** level


def resolution_table(fov, d_max, levels):
    """Rows ``(level, angular_resolution, radial_resolution)`` for each level."""
    return [(lvl, fov / 2 ** lvl, d_max / 2 ** lvl) for lvl in levels]


def levels_for_resolution(d_max, target):
    """Smallest level whose nominal radial resolution is <= ``target``."""
    return max(0, math.ceil(math.log2(d_max / target) - 1e-12))


# ---------------------------------------------------------------------------
# Beam-width calibration


def array_factor_fwhm(ris, medium, w, n_s=4097):
    """3 dB width, in ``sin(theta)`` units, of a Gaussian-tapered row of elements.

    Far-field intensity of ``sum_m exp(-x_m^2/w^2) exp(j k s x_m)`` over the
    RIS x coordinates, measured at broadside.
    """
    x = ris.x
    taper = np.exp(-(x / w) ** 2)
    s = np.linspace(0.0, 1.0, n_s)
    af = np.abs(np.exp(1j * medium.wavenumber * np.outer(s, x)) @ taper) ** 2
    af /= af[0]
    below = np.nonzero(af < 0.5)[0]
    if len(below) == 0:
        return 2.0
    j = below[0]
    a, b = af[j - 1], af[j]
    return 2 * (s[j - 1] + (s[j] - s[j - 1]) * (a - 0.5) / (a - b))


@dataclass(frozen=True)
class BeamwidthTable:
    """Footprint radius versus simulated 3 dB beamwidth (sin-space), monotone decreasing."""

    radii: np.ndarray
    widths: np.ndarray

    @classmethod
    def build(cls, ris, medium, n=48):
        radii = np.geomspace(ris.pitch / 2, ris.aperture / 2, n)
        widths = np.array([array_factor_fwhm(ris, medium, w) for w in radii])
        # keep the strictly decreasing part so the inverse is well defined
        keep = np.concatenate([[True], np.diff(widths) < 0])
        keep = np.logical_and.accumulate(keep)
        return cls(radii[keep], widths[keep])

    def footprint_for(self, width):
        """Footprint whose beam has the requested 3 dB width, clamped to the table ends."""
        if width >= self.widths[0]:
            return float(self.radii[0])
        if width <= self.widths[-1]:
            return float(self.radii[-1])
        lw = np.log(self.widths[::-1])
        lr = np.log(self.radii[::-1])
        return float(np.exp(np.interp(math.log(width), lw, lr)))


def sector_footprint(table, sector):
    """Footprint covering ``sector`` with the 3 dB width of the steered beam."""
    return table.footprint_for(math.sin(sector.hi) - math.sin(sector.lo))


# ---------------------------------------------------------------------------
# Probes


@dataclass(frozen=True)
class Probe:
    """RIS configuration for one scan: phase profile plus the AP-controlled footprint."""

    phase: object
    beam: IncidentBeamSpec

    def descriptor(self):
        b = self.beam
        fp = f"w={b.footprint_radius:.6g}"
        if b.footprint_radius_y != b.footprint_radius:
            fp += f" wy={b.footprint_radius_y:.6g}"
        return f"{self.phase.descriptor()} {fp}"


def angle_probe(scenario, table, sector, power=1.0):
    w = sector_footprint(table, sector)
    theta_i = scenario.incident.incidence_angle
    beam = IncidentBeamSpec.with_power(w, power, theta_i)
    return Probe(steering_phase(scenario.ris, scenario.medium, theta_i, sector.center), beam)


def range_probe(scenario, table, theta, theta_width, sector, power=1.0):
    """Range-sheet probe covering ``sector`` along ``theta``.

    Along x the footprint comes from the beamwidth table so the beam still
    covers the final angular sector. Along y the footprint and wavefront
    radius are those of a Gaussian beam whose waist sits at the sector
    midpoint with a Rayleigh range of half the sector length; sibling
    probes then give equal RSS at their shared split point.
    """
    ris, medium = scenario.ris, scenario.medium
    wx = table.footprint_for(math.sin(theta + theta_width / 2) - math.sin(theta - theta_width / 2))
    z_w = sector.center
    half = 0.5 * sector.width
    wy, radius = gaussian_design(z_w, half, medium.wavelength)
    if wy > ris.aperture / 2:
        raise ResolutionLimitError(
            f"range sector [{sector.lo:.4g}, {sector.hi:.4g}] m needs footprint {wy:.4g} m > D/2",
            max_level=sector.level - 1,
        )
    theta_i = scenario.incident.incidence_angle
    beam = IncidentBeamSpec.with_power(wx, power, theta_i, footprint_radius_y=wy)
    phase = range_sheet_phase(ris, medium, theta, radius)
    if theta_i != 0:
        from .phase import compose

        phase = compose(phase, steering_phase(ris, medium, theta_i, 0.0))
    return Probe(phase, beam)


def rss_measure(scenario, profile, beam=None, rng=None):
    """Received power ``|E(ue)|^2`` at the scenario UE for one RIS configuration.

    Parameters
    ----------
    scenario : Scenario
    profile : PhaseProfile
    beam : IncidentBeamSpec, optional
        Overrides ``scenario.incident`` (the AP footprint is part of a probe).
    rng : numpy.random.Generator, optional
        Noise source; defaults to a generator seeded with ``scenario.seed``.
        Only used when ``scenario.rss_noise_db > 0``.
    """
    beam = scenario.incident if beam is None else beam
    if beam.amplitude == 0:
        return 0.0
    src = reflect(incident_field_on_ris(scenario.ris, beam, scenario.medium), profile)
    ue = scenario.ue_point[None, :]
    if scenario.obstacles:
        value = field_through_obstacles(src, ue, scenario.obstacles)[0]
    else:
        value = propagate_direct(src, ue, amplitude_cutoff=RSS_AMPLITUDE_CUTOFF)[0]
    rss = float(abs(value) ** 2)
    if scenario.rss_noise_db > 0:
        rng = np.random.default_rng(scenario.seed) if rng is None else rng
        sigma = scenario.rss_noise_db * math.log(10) / 10
        rss = float(np.mean(rss * np.exp(sigma * rng.standard_normal(scenario.rss_repeats))))
    return rss


def _choose(rss_a, rss_b):
    # ties go to the lower index
    return 0 if rss_a >= rss_b else 1


# ---------------------------------------------------------------------------
# Phases


def _check_in_view(scenario, grid):
    theta, r = scenario.ue_angle, scenario.ue_range
    if not grid.theta_min <= theta <= grid.theta_max:
        raise SearchFailureError(
            f"UE at {math.degrees(theta):.3f} deg is outside the field of view "
            f"[{math.degrees(grid.theta_min):.3f}, {math.degrees(grid.theta_max):.3f}] deg"
        )
    if r > grid.d_max:
        raise SearchFailureError(f"UE range {r:.4g} m exceeds d_max={grid.d_max} m")


def phase1_angle_search(scenario, grid, levels, *, table=None, start=None, state=None, rng=None):
    """Binary angular search over ``levels`` levels.

    ``start`` is the sector to refine (the root by default); a warm start
    passes a deeper sector. Returns ``(sector, state)``.
    """
    levels = check_int(levels, "levels", min_val=0)
    table = BeamwidthTable.build(scenario.ris, scenario.medium) if table is None else table
    state = SearchState() if state is None else state
    state.phase = "angle"
    sector = grid.root_angle() if start is None else start
    if start is None and levels < 1:
        raise InvalidArgumentError("Phase 1 needs at least one level")
    _check_in_view(scenario, grid)
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    for _ in range(levels):
        children = sector.split()
        values = []
        for idx, child in enumerate(children):
            probe = angle_probe(scenario, table, child)
            rss = rss_measure(scenario, probe.phase, probe.beam, rng)
            state.record("angle", child.level, idx, probe.descriptor(), rss, child)
            values.append(rss)
        if values[0] == 0 and values[1] == 0:
            raise SearchFailureError(f"no signal at angular level {children[0].level}")
        sector = children[_choose(*values)]
        state.sector, state.level = sector, sector.level
    return sector, state


def phase2_range_search(scenario, direction, d_max, levels, overlap=0.1, *, theta_width=None, table=None,
                        start=None, state=None, rng=None):
    """Binary range search along ``direction`` over ``levels`` levels.

    ``theta_width`` is the width of the angular sector found in Phase 1; the
    probes are widened along x to cover it (a pencil beam when omitted).
    Returns ``(sector, state)``.

    Raises
    ------
    ResolutionLimitError
        A level needs a y footprint beyond the aperture; ``max_level`` is
        the deepest level that could be served.
    """
    levels = check_int(levels, "levels", min_val=0)
    overlap = check_scalar(overlap, "overlap", min_val=0.0, max_val=0.5, include_max=False)
    d_max = check_positive(d_max, "d_max")
    table = BeamwidthTable.build(scenario.ris, scenario.medium) if table is None else table
    state = SearchState() if state is None else state
    state.phase = "range"
    sector = RangeSector(0.0, d_max, 0) if start is None else start
    if start is None and levels < 1:
        raise InvalidArgumentError("Phase 2 needs at least one level")
    theta_width = 0.0 if theta_width is None else theta_width
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    for _ in range(levels):
        children = sector.split(overlap)
        probes = [range_probe(scenario, table, direction, theta_width, c) for c in children]
        values = []
        for idx, (child, probe) in enumerate(zip(children, probes)):
            rss = rss_measure(scenario, probe.phase, probe.beam, rng)
            state.record("range", child.level, idx, probe.descriptor(), rss, child)
            values.append(rss)
        sector = children[_choose(*values)]
        state.sector, state.level = sector, sector.level
    return sector, state


def max_range_level(scenario, grid, overlap=0.1, limit=30):
    """Deepest Phase-2 level whose probes fit the aperture for every sector path."""
    ris, lam = scenario.ris, scenario.medium.wavelength
    frontier = [grid.root_range()]
    for level in range(1, limit + 1):
        nxt = []
        for s in frontier:
            for c in s.split(overlap):
                wy, _ = gaussian_design(c.center, 0.5 * c.width, lam)
                if wy > ris.aperture / 2:
                    return level - 1
                nxt.append(c)
        frontier = nxt
    return limit


def localize(scenario, grid, l1, l2, overlap=0.1, *, table=None, rng=None):
    """Phase 1 then Phase 2; ``2 * (l1 + l2)`` scans in total."""
    l1 = check_int(l1, "L1", min_val=1)
    l2 = check_int(l2, "L2", min_val=1)
    table = BeamwidthTable.build(scenario.ris, scenario.medium) if table is None else table
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    _check_range_feasible(scenario, grid, l2, overlap)
    ang, state = phase1_angle_search(scenario, grid, l1, table=table, rng=rng)
    rng_sector, state = phase2_range_search(scenario, ang.center, grid.d_max, l2, overlap, theta_width=ang.width,
                                            table=table, state=state, rng=rng)
    state.phase = "done"
    return _result(grid, ang, rng_sector, l1, l2, state)


def _check_range_feasible(scenario, grid, l2, overlap):
    deepest = max_range_level(scenario, grid, overlap, limit=l2)
    if deepest < l2:
        raise ResolutionLimitError(
            f"Phase 2 level {l2} needs a footprint beyond the aperture; max achievable level is {deepest}",
            max_level=deepest,
        )


def _result(grid, ang, rng_sector, l1, l2, state, time=None):
    return LocalizationResult(
        theta=ang.center,
        range=rng_sector.center,
        angular_sector=ang,
        range_sector=rng_sector,
        angular_resolution=angular_resolution(grid, l1),
        radial_resolution=radial_resolution(grid.d_max, l2),
        scans=state.scans,
        log=tuple(state.log),
        time=time,
    )


# ---------------------------------------------------------------------------
# Warm start


@dataclass(frozen=True)
class WarmStart:
    theta: float
    range: float
    angle_sector: AngularSector
    range_sector: RangeSector
    angle_level: int
    range_level: int


def _angle_parent(grid, interval, depth):
    """Deepest sector (level <= depth) of the angular tree containing ``interval``."""
    sector = grid.root_angle()
    for _ in range(depth):
        nxt = [c for c in sector.split() if c.lo <= interval[0] and interval[1] <= c.hi]
        if not nxt:
            break
        sector = nxt[0]
    return sector


def _range_parent(grid, interval, depth, overlap):
    sector = grid.root_range()
    for _ in range(depth):
        nxt = [c for c in sector.split(overlap) if c.lo <= interval[0] and interval[1] <= c.hi]
        if not nxt:
            break
        sector = nxt[0]
    return sector


def predict_warm_start(history, t_next, grid, l1, l2, overlap=0.1, inflation=1.0):
    """Extrapolate the UE to ``t_next`` and pick where the next search starts.

    ``history`` is a sequence of :class:`LocalizationResult` with increasing
    ``time``. The predicted (theta, r) cell spans ``inflation`` resolution
    units centred on the prediction; the search restarts at the deepest tree
    sector that still contains it. With the default of one unit a static UE
    restarts at the last level of each phase. ``angle_level``/``range_level`` are the first
    levels that will be re-run, so the warm search costs
    ``2 * (l1 - angle_level + 1) + 2 * (l2 - range_level + 1)`` scans.
    """
    if len(history) < 2:
        raise InvalidArgumentError("warm start needs at least two past results")
    times = [h.time for h in history]
    if any(t is None for t in times) or any(b <= a for a, b in zip(times, times[1:])) or t_next <= times[-1]:
        raise InvalidArgumentError(f"timestamps must be strictly increasing, got {times} then {t_next}")
    a, b = history[-2], history[-1]
    frac = (t_next - b.time) / (b.time - a.time)
    theta = b.theta + (b.theta - a.theta) * frac
    r = b.range + (b.range - a.range) * frac
    theta = min(max(theta, grid.theta_min), grid.theta_max)
    r = min(max(r, 0.0), grid.d_max)
    inflation = check_positive(inflation, "inflation")
    da = inflation * angular_resolution(grid, l1) / 2
    dr = inflation * radial_resolution(grid.d_max, l2) / 2
    ang = _angle_parent(grid, (theta - da, theta + da), l1)
    rs = _range_parent(grid, (r - dr, r + dr), l2, overlap)
    return WarmStart(theta, r, ang, rs, max(1, ang.level), max(1, rs.level))


def localize_warm(scenario, grid, l1, l2, warm, overlap=0.1, *, table=None, rng=None, time=None):
    """Search starting from the sectors chosen by :func:`predict_warm_start`."""
    table = BeamwidthTable.build(scenario.ris, scenario.medium) if table is None else table
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    _check_range_feasible(scenario, grid, l2, overlap)
    a_start = _angle_parent(grid, (warm.angle_sector.lo, warm.angle_sector.hi), warm.angle_level - 1)
    r_start = _range_parent(grid, (warm.range_sector.lo, warm.range_sector.hi), warm.range_level - 1, overlap)
    ang, state = phase1_angle_search(scenario, grid, l1 - a_start.level, table=table, start=a_start, rng=rng)
    rs, state = phase2_range_search(scenario, ang.center, grid.d_max, l2 - r_start.level, overlap,
                                    theta_width=ang.width, table=table, start=r_start, state=state, rng=rng)
    state.phase = "done"
    return _result(grid, ang, rs, l1, l2, state, time=time)


def track(scenario, grid, l1, l2, n_slots, slot, overlap=0.1, *, inflation=1.0, table=None):
    """Localize a UE moving at ``scenario.ue_velocity`` over ``n_slots`` time slots.

    The first two slots run cold; later slots warm-start from the linear
    prediction. Returns the list of results (each with its ``time``).
    """
    if scenario.ue_velocity is None:
        raise InvalidArgumentError("tracking needs ue_velocity in the scenario")
    table = BeamwidthTable.build(scenario.ris, scenario.medium) if table is None else table
    rng = np.random.default_rng(scenario.seed)
    x0, z0 = scenario.ue_position
    vx, vz = scenario.ue_velocity
    out = []
    for i in range(n_slots):
        t = i * slot
        sc = scenario.with_ue((x0 + vx * t, z0 + vz * t))
        if i < 2:
            res = localize(sc, grid, l1, l2, overlap, table=table, rng=rng)
            res = replace(res, time=t)
        else:
            warm = predict_warm_start(out, t, grid, l1, l2, overlap, inflation)
            res = localize_warm(sc, grid, l1, l2, warm, overlap, table=table, rng=rng, time=t)
        out.append(res)
    return out
