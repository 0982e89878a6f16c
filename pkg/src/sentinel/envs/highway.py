"""Highway-lite: a small multi-lane longitudinal traffic simulator.

Vehicles are points on 1-D lanes. Traffic drives at constant desired speeds,
slows to its leader's speed when closer than ``follow_gap``, and occasionally
changes lane into a gap that is at least ``merge_gap`` long. The ego picks a
lane-change or speed-level action each second. Two vehicles in the same lane
closer than ``crash_gap`` after a move have crashed, which ends the episode.

Lane 0 is the leftmost lane; the reward favours the rightmost lane and high
ego speed, and charges for crashing.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .base import Env, EnvStep

LANE_LEFT, LANE_RIGHT, FASTER, SLOWER, IDLE = range(5)
ACTION_NAMES = ("lane-left", "lane-right", "accelerate", "decelerate", "idle")
EGO = 0


@dataclass(frozen=True)
class HighwayConfig:
    n_lanes: int = 5
    n_vehicles: int = 10
    max_steps: int = 40
    dt: float = 1.0
    ego_speeds: tuple = (20.0, 20.0 + 10 / 3, 20.0 + 20 / 3, 30.0)
    traffic_speed_range: tuple = (20.0, 25.0)
    crash_gap: float = 5.0
    follow_gap: float = 25.0
    merge_gap: float = 10.0
    spawn_gap: float = 15.0
    spawn_range: tuple = (-60.0, 240.0)
    lane_change_prob: float = 0.02
    w_lane: float = 0.1
    w_speed: float = 0.4
    w_crash: float = 1.0
    initial_lane: int | None = None
    initial_speed_index: int | None = 1
    gap_scale: float = 100.0
    speed_scale: float = 10.0

    @property
    def v_min(self) -> float:
        return self.ego_speeds[0]

    @property
    def v_max(self) -> float:
        return self.ego_speeds[-1]

    def max_step_reward(self) -> float:
        return self.w_lane + self.w_speed

    def with_overrides(self, **kw) -> "HighwayConfig":
        return replace(self, **kw)


@dataclass
class _Traffic:
    lane: np.ndarray
    x: np.ndarray
    v: np.ndarray
    desired: np.ndarray = field(default=None)


class HighwayLite(Env):
    name = "highway-lite"
    state_dim = 8
    n_actions = 5

    def __init__(self, seed=None, config: HighwayConfig | None = None):
        super().__init__(seed)
        self.config = config or HighwayConfig()
        self.speed_index = 0
        self.veh: _Traffic | None = None

    # -- setup ---------------------------------------------------------------

    def _reset(self):
        cfg = self.config
        lane = cfg.initial_lane if cfg.initial_lane is not None else int(self.rng.integers(cfg.n_lanes))
        self.speed_index = (cfg.initial_speed_index if cfg.initial_speed_index is not None
                            else int(self.rng.integers(len(cfg.ego_speeds))))
        lanes, xs = [lane], [0.0]
        while len(lanes) < cfg.n_vehicles + 1:
            ln = int(self.rng.integers(cfg.n_lanes))
            x = float(self.rng.uniform(*cfg.spawn_range))
            if all(abs(x - xo) >= cfg.spawn_gap for lo, xo in zip(lanes, xs) if lo == ln):
                lanes.append(ln)
                xs.append(x)
        desired = np.concatenate(([np.nan], self.rng.uniform(*cfg.traffic_speed_range, cfg.n_vehicles)))
        v = desired.copy()
        v[EGO] = cfg.ego_speeds[self.speed_index]
        self.veh = _Traffic(np.array(lanes), np.array(xs), v, desired)
        return self.observe()

    def place(self, ego_lane: int, ego_speed_index: int, traffic=()) -> np.ndarray:
        """Start an episode from an explicit layout of ``(lane, x, speed)`` traffic tuples."""
        self.done, self.t = False, 0
        self.speed_index = ego_speed_index
        lanes = [ego_lane] + [int(t[0]) for t in traffic]
        xs = [0.0] + [float(t[1]) for t in traffic]
        speeds = [self.config.ego_speeds[ego_speed_index]] + [float(t[2]) for t in traffic]
        desired = np.array([np.nan] + speeds[1:])
        self.veh = _Traffic(np.array(lanes), np.array(xs), np.array(speeds), desired)
        return self.observe()

    # -- dynamics ------------------------------------------------------------

    def _step(self, action):
        cfg, veh = self.config, self.veh
        lane = veh.lane[EGO]
        if action == LANE_LEFT and lane > 0:
            veh.lane[EGO] = lane - 1
        elif action == LANE_RIGHT and lane < cfg.n_lanes - 1:
            veh.lane[EGO] = lane + 1
        elif action == FASTER:
            self.speed_index = min(self.speed_index + 1, len(cfg.ego_speeds) - 1)
        elif action == SLOWER:
            self.speed_index = max(self.speed_index - 1, 0)
        veh.v[EGO] = cfg.ego_speeds[self.speed_index]

        self._traffic_lane_changes()
        self._traffic_speeds()
        veh.x = veh.x + veh.v * cfg.dt

        crashed = self._crashed()
        ego_crash = bool(crashed[EGO])
        timeout = self.t >= cfg.max_steps
        speed_frac = (veh.v[EGO] - cfg.v_min) / (cfg.v_max - cfg.v_min)
        reward = (cfg.w_lane * float(veh.lane[EGO] == cfg.n_lanes - 1)
                  + cfg.w_speed * speed_frac - cfg.w_crash * float(ego_crash))
        info = {"crash": ego_crash, "any_crash": bool(crashed.any()),
                "crashed": np.flatnonzero(crashed).tolist(), "timeout": timeout}
        return EnvStep(self.observe(), float(reward), bool(crashed.any()) or timeout, info)

    def _traffic_lane_changes(self):
        cfg, veh = self.config, self.veh
        if cfg.lane_change_prob <= 0:
            return
        for i in range(1, len(veh.x)):
            if self.rng.random() >= cfg.lane_change_prob:
                continue
            target = veh.lane[i] + (1 if self.rng.random() < 0.5 else -1)
            if not 0 <= target < cfg.n_lanes:
                continue
            others = (veh.lane == target)
            others[i] = False
            if np.all(np.abs(veh.x[others] - veh.x[i]) >= cfg.merge_gap):
                veh.lane[i] = target

    def _traffic_speeds(self):
        # front to back per lane so each follower sees its leader's new speed
        cfg, veh = self.config, self.veh
        for lane in np.unique(veh.lane):
            idx = np.flatnonzero(veh.lane == lane)
            idx = idx[np.argsort(-veh.x[idx], kind="stable")]
            for rank, i in enumerate(idx):
                if i == EGO:
                    continue
                v = veh.desired[i]
                if rank > 0:
                    lead = idx[rank - 1]
                    if veh.x[lead] - veh.x[i] < cfg.follow_gap:
                        v = min(v, veh.v[lead])
                veh.v[i] = v

    def _crashed(self) -> np.ndarray:
        veh = self.veh
        crashed = np.zeros(len(veh.x), dtype=bool)
        for lane in np.unique(veh.lane):
            idx = np.flatnonzero(veh.lane == lane)
            if idx.size < 2:
                continue
            idx = idx[np.argsort(veh.x[idx], kind="stable")]
            close = np.diff(veh.x[idx]) < self.config.crash_gap
            crashed[idx[:-1][close]] = True
            crashed[idx[1:][close]] = True
        return crashed

    # -- observation ---------------------------------------------------------

    def observe(self) -> np.ndarray:
        """8 features in [-1, 1]: ego lane, ego speed, then (gap, relative speed)
        of the nearest vehicle ahead in the ego lane and the nearest vehicle
        (either direction) in the left and right lanes. A missing lane reads as
        a wall (gap 0); an empty lane reads as open road (gap 1)."""
        cfg, veh = self.config, self.veh
        lane, x, v = veh.lane[EGO], veh.x[EGO], veh.v[EGO]
        obs = [2.0 * lane / (cfg.n_lanes - 1) - 1.0,
               2.0 * (v - cfg.v_min) / (cfg.v_max - cfg.v_min) - 1.0]
        for target, ahead_only in ((lane, True), (lane - 1, False), (lane + 1, False)):
            if not 0 <= target < cfg.n_lanes:
                obs += [0.0, 0.0]
                continue
            mask = veh.lane == target
            mask[EGO] = False
            gaps = veh.x[mask] - x
            rel = veh.v[mask] - v
            if ahead_only:
                keep = gaps >= 0
                gaps, rel = gaps[keep], rel[keep]
            if gaps.size == 0:
                obs += [1.0, 0.0]
                continue
            j = int(np.argmin(np.abs(gaps)))
            obs += [float(np.clip(gaps[j] / cfg.gap_scale, -1, 1)),
                    float(np.clip(rel[j] / cfg.speed_scale, -1, 1))]
        return np.array(obs)

    def ego_speed(self) -> float:
        return float(self.veh.v[EGO])

    def ego_lane(self) -> int:
        return int(self.veh.lane[EGO])
