"""Deterministic bouncing-ball generator.

Trajectories are built as an exact piecewise timeline (ballistic flight,
ground rolling, rest) with analytically solved bounce contact times, then
sampled on the frame grid. Flight samples therefore match the closed-form
parabola to machine precision and no sample ever penetrates the ground.

Families:
  * single launch: one impulse, bounces until rest,
  * multi launch: a new random impulse after every stop (projectile or
    rolling with equal chance),
  * tennis rally: two players exchange strokes over a net on a regulation
    court; each stroke's speed is solved in closed form to reach a sampled
    landing target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .dataset import Sequence, TrackSample
from .errors import BehindCamera, NonTerminating, TargetUnreachable

UP = np.array([0.0, 1.0, 0.0])

COURT_LENGTH = 23.77  # meters, along z; the net plane is z = 0
COURT_WIDTH = 10.97
NET_HEIGHT = 0.914
NET_CLEARANCE = 0.10


@dataclass(frozen=True)
class PhysicsParams:
    gravity: float = 9.81            # magnitude, acts along -y
    restitution: float = 0.72        # vertical speed kept per bounce
    tangential_retain: float = 0.8   # horizontal speed kept per bounce
    rolling_decel: float = 1.5       # m/s^2 while rolling on the ground
    stop_speed: float = 0.1          # below this the ball is stopped
    dt: float = 0.02

    def __post_init__(self):
        if not (self.gravity > 0 and self.dt > 0 and self.stop_speed > 0):
            raise ValueError("gravity, dt and stop_speed must be positive")
        if not (0 < self.restitution <= 1 and 0 < self.tangential_retain <= 1):
            raise ValueError("restitution and tangential_retain must be in (0, 1]")


@dataclass(frozen=True)
class LaunchSpec:
    speed: float
    elevation: float  # radians, 0 = horizontal
    azimuth: float    # radians in the x-z plane, from +x toward +z
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("launch speed must be positive")
        if self.origin[1] != 0.0:
            raise ValueError("launch origin must be on the ground")

    def velocity(self) -> np.ndarray:
        ch = self.speed * math.cos(self.elevation)
        return np.array(
            [ch * math.cos(self.azimuth), self.speed * math.sin(self.elevation),
             ch * math.sin(self.azimuth)]
        )


@dataclass
class SimConfig:
    family: str                      # "single" | "multi" | "tennis"
    fps: float = 50.0
    num_launches: int = 1
    num_strokes: int = 3
    extent: tuple = (4.5, 4.5)       # traversable x/z span in meters
    speed_range: tuple = (1.2, 4.1)
    elevation_range: tuple = (math.radians(15), math.radians(75))
    max_vertical_speed: float = 3.85
    restitution_range: tuple = (0.6, 0.85)
    seed: int = 0

    def __post_init__(self):
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("world extents must be positive")
        if self.num_launches < 1 or self.num_strokes < 1:
            raise ValueError("need at least one launch/stroke")


@dataclass
class SimEvent:
    kind: str          # "launch" | "bounce" | "hit" | "stop" | "catch"
    t: float
    position: np.ndarray
    v_before: np.ndarray
    v_after: np.ndarray


@dataclass
class _Segment:
    t0: float
    t1: float
    p0: np.ndarray
    v0: np.ndarray
    mode: str  # "flight" | "roll" | "rest"


@dataclass
class Timeline:
    phys: PhysicsParams
    segments: list = field(default_factory=list)
    events: list = field(default_factory=list)
    end_time: float = 0.0
    max_events: int = 10000

    def _event(self, kind, t, pos, vb, va):
        if len(self.events) >= self.max_events:
            raise NonTerminating(f"event cap {self.max_events} exceeded at t={t:.3f}s")
        self.events.append(SimEvent(kind, t, pos.copy(), vb.copy(), va.copy()))

    def position_at(self, t: float) -> np.ndarray:
        seg = self._segment_at(t)
        tau = t - seg.t0
        if seg.mode == "flight":
            p = seg.p0 + seg.v0 * tau
            p[1] -= 0.5 * self.phys.gravity * tau * tau
            return p
        if seg.mode == "roll":
            s0 = math.hypot(seg.v0[0], seg.v0[2])
            dist = s0 * tau - 0.5 * self.phys.rolling_decel * tau * tau
            return seg.p0 + seg.v0 / s0 * dist
        return seg.p0.copy()

    def _segment_at(self, t: float) -> _Segment:
        lo, hi = 0, len(self.segments) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.segments[mid].t0 <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.segments[lo]

    # -- construction -------------------------------------------------------

    def propagate_to_rest(self, t: float, pos, vel) -> float:
        """Run flight/bounce/roll physics until the ball stops; returns the
        stop time. The final segment is an open-ended rest."""
        ph = self.phys
        pos = np.asarray(pos, dtype=np.float64).copy()
        vel = np.asarray(vel, dtype=np.float64).copy()
        guard = 0
        while True:
            guard += 1
            if guard > self.max_events:
                raise NonTerminating("ball failed to stop within the step cap")
            airborne = pos[1] > 0.0 or abs(vel[1]) > 0.0
            if airborne:
                # contact time: y + vy*tau - g/2 tau^2 = 0, positive root
                disc = vel[1] * vel[1] + 2.0 * ph.gravity * pos[1]
                tau = (vel[1] + math.sqrt(max(disc, 0.0))) / ph.gravity
                self.segments.append(_Segment(t, t + tau, pos.copy(), vel.copy(), "flight"))
                t += tau
                contact = pos + vel * tau
                contact[1] = 0.0
                v_impact = vel.copy()
                v_impact[1] -= ph.gravity * tau
                vy_after = -ph.restitution * v_impact[1]
                v_after = np.array(
                    [v_impact[0] * ph.tangential_retain,
                     vy_after,
                     v_impact[2] * ph.tangential_retain]
                )
                if vy_after < ph.stop_speed:
                    v_after[1] = 0.0  # too slow to bounce again: roll from here
                self._event("bounce", t, contact, v_impact, v_after)
                pos, vel = contact, v_after
                continue
            speed = math.hypot(vel[0], vel[2])
            if speed > ph.stop_speed:
                tau = (speed - ph.stop_speed) / ph.rolling_decel
                self.segments.append(_Segment(t, t + tau, pos.copy(), vel.copy(), "roll"))
                stop_pos = self.position_at(t + tau)
                v_at_stop = vel / speed * ph.stop_speed
                t += tau
                pos = stop_pos
                vel = v_at_stop
            self._event("stop", t, pos, vel, np.zeros(3))
            self.segments.append(_Segment(t, math.inf, pos.copy(), np.zeros(3), "rest"))
            self.end_time = t
            return t


def _sample_sequence(tl: Timeline, phys: PhysicsParams, flag_frames, seq_id, fps) -> Sequence:
    n_last = int(math.ceil(tl.end_time / phys.dt - 1e-9))
    n_last = max(n_last, 1)
    samples = []
    flags = set(int(f) for f in flag_frames)
    flags.add(n_last)
    for f in range(n_last + 1):
        p = tl.position_at(f * phys.dt)
        samples.append(
            TrackSample(
                frame=f, x=float(p[0]), y=float(p[1]), z=float(p[2]),
                eot=1 if f in flags else 0,
            )
        )
    bounces = [
        {"frame": int(math.floor(ev.t / phys.dt + 0.5)), "x": float(ev.position[0]),
         "z": float(ev.position[2])}
        for ev in tl.events
        if ev.kind == "bounce"
    ]
    seq = Sequence(samples, fps=fps, seq_id=seq_id, bounces=bounces)
    seq.events = tl.events  # full event log for tests and diagnostics
    return seq


def simulate_single_launch(spec: LaunchSpec, phys: PhysicsParams, seq_id="single") -> Sequence:
    """One impulse from the ground; the sequence ends on the frame where the
    ball has stopped. The only end-of-trajectory flag is the final step."""
    tl = Timeline(phys)
    vel = spec.velocity()
    tl._event("launch", 0.0, np.asarray(spec.origin, dtype=np.float64), np.zeros(3), vel)
    tl.propagate_to_rest(0.0, spec.origin, vel)
    return _sample_sequence(tl, phys, [], seq_id, 1.0 / phys.dt)


def simulate_multi_launch(config: SimConfig, phys: PhysicsParams, seq_id="multi") -> Sequence:
    """A new impulse after every stop; projectile and rolling launches occur
    with equal chance. Flags sit on the step right before each impulse and
    on the final step."""
    if config.family != "multi":
        raise ValueError("config.family must be 'multi'")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & (2**63 - 1), 0x6D75]))
    ph = PhysicsParams(
        gravity=phys.gravity,
        restitution=float(rng.uniform(*config.restitution_range)),
        tangential_retain=phys.tangential_retain,
        rolling_decel=phys.rolling_decel,
        stop_speed=phys.stop_speed,
        dt=1.0 / config.fps,
    )
    ex, ez = config.extent
    lo_x, hi_x = -ex / 2.0, ex / 2.0
    lo_z, hi_z = 1.0, 1.0 + ez  # keep the scene off the vertical plane z=0
    tl = Timeline(ph)
    pos = np.array([0.0, 0.0, (lo_z + hi_z) / 2.0])
    t = 0.0
    flag_frames = []
    for k in range(config.num_launches):
        target = np.array([rng.uniform(lo_x, hi_x), 0.0, rng.uniform(lo_z, hi_z)])
        direction = target - pos
        az = math.atan2(direction[2], direction[0])
        rolling = rng.uniform() < 0.5
        if rolling:
            elevation = 0.0
            speed = rng.uniform(*config.speed_range)
        else:
            for _ in range(100):
                elevation = rng.uniform(*config.elevation_range)
                speed = rng.uniform(*config.speed_range)
                if speed * math.sin(elevation) <= config.max_vertical_speed:
                    break
        vel = LaunchSpec(speed, elevation, az, (0.0, 0.0, 0.0)).velocity()
        tl._event("launch", t, pos, np.zeros(3), vel)
        t_stop = tl.propagate_to_rest(t, pos, vel)
        if k < config.num_launches - 1:
            # next impulse lands on the first grid frame at/after the stop
            next_frame = int(math.ceil(t_stop / ph.dt - 1e-9))
            flag_frames.append(next_frame)
            t = next_frame * ph.dt
            pos = tl.position_at(t)  # the next flight segment shadows the rest
    return _sample_sequence(tl, ph, flag_frames, seq_id, config.fps)


def simulate_tennis_rally(config: SimConfig, phys: PhysicsParams, seq_id="tennis") -> Sequence:
    """Alternating strokes on a regulation court. Launch elevation is drawn
    from [10, 20] degrees and the speed solved so the flat-ground arc lands
    on the sampled target; arcs that would cross the net plane below net
    height are resampled. The rally ends when the last stroke lands (the
    receiver stops the ball), so the final sample is on the ground."""
    if config.family != "tennis":
        raise ValueError("config.family must be 'tennis'")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & (2**63 - 1), 0x7465]))
    ph = PhysicsParams(
        gravity=phys.gravity,
        restitution=float(rng.uniform(*config.restitution_range)),
        tangential_retain=phys.tangential_retain,
        rolling_decel=phys.rolling_decel,
        stop_speed=phys.stop_speed,
        dt=1.0 / config.fps,
    )
    half_l = COURT_LENGTH / 2.0
    half_w = COURT_WIDTH / 2.0
    tl = Timeline(ph)
    pos = np.array([rng.uniform(-3.0, 3.0), 0.0, -(half_l - 0.5)])
    t = 0.0
    flag_frames = []
    for k in range(config.num_strokes):
        side = 1.0 if pos[2] < 0 else -1.0  # hit toward the opposite half
        vel = None
        for _ in range(50):
            target = np.array(
                [rng.uniform(-(half_w - 1.0), half_w - 1.0), 0.0,
                 side * rng.uniform(2.0, half_l - 1.0)]
            )
            theta = rng.uniform(math.radians(10.0), math.radians(20.0))
            horiz = target - pos
            horiz[1] = 0.0
            dist = np.linalg.norm(horiz)
            speed = math.sqrt(ph.gravity * dist / math.sin(2.0 * theta))
            u = horiz / dist
            cand = np.array(
                [speed * math.cos(theta) * u[0], speed * math.sin(theta),
                 speed * math.cos(theta) * u[2]]
            )
            tau_net = -pos[2] / cand[2]
            y_net = pos[1] + cand[1] * tau_net - 0.5 * ph.gravity * tau_net * tau_net
            if y_net > NET_HEIGHT + NET_CLEARANCE:
                vel = cand
                break
        if vel is None:
            raise TargetUnreachable(f"stroke {k}: no clearing arc after 50 attempts")
        tl._event("hit" if k else "launch", t, pos, np.zeros(3), vel)
        if t > 0:
            flag_frames.append(int(math.floor((t - 1e-12) / ph.dt)))
        # flight until the first ground contact
        disc = vel[1] ** 2 + 2.0 * ph.gravity * pos[1]
        tau_land = (vel[1] + math.sqrt(disc)) / ph.gravity
        tl.segments.append(_Segment(t, t + tau_land, pos.copy(), vel.copy(), "flight"))
        t_land = t + tau_land
        contact = pos + vel * tau_land
        contact[1] = 0.0
        v_impact = vel.copy()
        v_impact[1] -= ph.gravity * tau_land
        if k == config.num_strokes - 1:
            # receiver stops the ball on its bounce
            tl._event("bounce", t_land, contact, v_impact, np.zeros(3))
            tl._event("catch", t_land, contact, v_impact, np.zeros(3))
            tl.segments.append(_Segment(t_land, math.inf, contact.copy(), np.zeros(3), "rest"))
            tl.end_time = t_land
            break
        v_after = np.array(
            [v_impact[0] * ph.tangential_retain, -ph.restitution * v_impact[1],
             v_impact[2] * ph.tangential_retain]
        )
        tl._event("bounce", t_land, contact, v_impact, v_after)
        # receiver waits 5-7 m behind the landing point along the ball path
        vh = math.hypot(v_after[0], v_after[2])
        t_flight2 = 2.0 * v_after[1] / ph.gravity
        t_hit_rel = min(rng.uniform(5.0, 7.0) / vh, 0.95 * t_flight2)
        tl.segments.append(
            _Segment(t_land, t_land + t_hit_rel, contact.copy(), v_after.copy(), "flight")
        )
        t = t_land + t_hit_rel
        pos = tl.position_at(t)
        tl.segments[-1] = _Segment(t_land, t, contact.copy(), v_after.copy(), "flight")
    return _sample_sequence(tl, ph, flag_frames, seq_id, config.fps)


def render_track(seq: Sequence, cam: geo.CameraModel) -> Sequence:
    """Fill pixels and plane points by projecting ground truth through the
    camera and back-projecting; propagates BehindCamera with the index."""
    gt = seq.gt_points()
    try:
        uv = geo.project_points(gt, cam)
    except BehindCamera:
        raise
    pp = geo.pixels_to_plane_points(uv, cam)
    samples = []
    for i, s in enumerate(seq.samples):
        samples.append(
            TrackSample(
                frame=s.frame,
                u=float(uv[i, 0]), v=float(uv[i, 1]),
                gx=float(pp[i, 0]), gz=float(pp[i, 1]),
                vx=float(pp[i, 2]), vy=float(pp[i, 3]),
                x=s.x, y=s.y, z=s.z, eot=s.eot, missing=0,
            )
        )
    out = Sequence(samples, seq.fps, cam.camera_id(), seq.seq_id, list(seq.bounces))
    if hasattr(seq, "events"):
        out.events = seq.events
    return out
