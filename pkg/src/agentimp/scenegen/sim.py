"""Point-mass kinematics on a straight multi-lane road (road axis = world +x).

Behaviour codes:
    0  IDM car-following toward the nearest in-lane leader (ego, trailing cars)
    1  cruise at constant speed, braking at a fixed deceleration from t_brake
    2  lane change: constant vx, lateral speed follows a raised-cosine bump
    3  constant velocity (crossing traffic, parked cars)

Updates are simultaneous: every agent reads the states at t_n and the new
positions use the new longitudinal speed (semi-implicit Euler).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agentimp import _accel
from agentimp._accel import njit

IDM, CRUISE, LANE_CHANGE, CONSTANT = 0, 1, 2, 3
NO_BRAKE = 1e9


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    lane_width: float = 3.5
    interaction_radius: float = 40.0
    vehicle_length: float = 4.5
    max_accel: float = 1.5
    comfort_decel: float = 2.0
    time_headway: float = 1.5
    min_gap: float = 2.0
    accel_exponent: float = 4.0

    def idm_array(self) -> np.ndarray:
        return np.array(
            [
                self.lane_width / 2.0,
                self.interaction_radius,
                self.vehicle_length,
                self.max_accel,
                self.comfort_decel,
                self.time_headway,
                self.min_gap,
                self.accel_exponent,
            ]
        )


@njit
def _lateral_speed(t, start, duration, dy):
    if t < start or t >= start + duration:
        return 0.0
    return dy / duration * (1.0 - math.cos(2.0 * math.pi * (t - start) / duration))


@njit
def _simulate_nb(state0, codes, params, t0, n_steps, dt, idm):
    half_lane, radius, veh_len, a_max, b_comf, headway, s0, expo = (
        idm[0], idm[1], idm[2], idm[3], idm[4], idm[5], idm[6], idm[7])
    na = state0.shape[0]
    traj = np.empty((n_steps + 1, na, 4))
    traj[0] = state0
    sqrt_ab = 2.0 * math.sqrt(a_max * b_comf)
    for n in range(n_steps):
        t = t0 + n * dt
        t_next = t0 + (n + 1) * dt
        cur = traj[n]
        nxt = traj[n + 1]
        for i in range(na):
            x = cur[i, 0]
            y = cur[i, 1]
            vx = cur[i, 2]
            vy = cur[i, 3]
            code = codes[i]
            if code == IDM:
                best_dx = np.inf
                lead_v = 0.0
                for j in range(na):
                    if j == i:
                        continue
                    dx = cur[j, 0] - x
                    if dx <= 0.0 or dx > radius or abs(cur[j, 1] - y) >= half_lane:
                        continue
                    if dx < best_dx or (dx == best_dx and cur[j, 2] < lead_v):
                        best_dx = dx
                        lead_v = cur[j, 2]
                v0 = params[i, 0]
                acc = 1.0 - (vx / v0) ** expo
                if best_dx < np.inf:
                    gap = max(best_dx - veh_len, 0.1)
                    s_star = s0 + max(0.0, vx * headway + vx * (vx - lead_v) / sqrt_ab)
                    acc -= (s_star / gap) ** 2
                v_new = max(0.0, vx + a_max * acc * dt)
                nxt[i, 0] = x + v_new * dt
                nxt[i, 1] = y
                nxt[i, 2] = v_new
                nxt[i, 3] = 0.0
            elif code == CRUISE:
                v_new = vx
                if t >= params[i, 0]:
                    v_new = max(0.0, vx - params[i, 1] * dt)
                nxt[i, 0] = x + v_new * dt
                nxt[i, 1] = y
                nxt[i, 2] = v_new
                nxt[i, 3] = 0.0
            elif code == LANE_CHANGE:
                nxt[i, 0] = x + vx * dt
                nxt[i, 1] = y + _lateral_speed(t, params[i, 0], params[i, 1], params[i, 2]) * dt
                nxt[i, 2] = vx
                nxt[i, 3] = _lateral_speed(t_next, params[i, 0], params[i, 1], params[i, 2])
            else:
                nxt[i, 0] = x + vx * dt
                nxt[i, 1] = y + vy * dt
                nxt[i, 2] = vx
                nxt[i, 3] = vy
    return traj


def _lateral_speed_np(t, start, duration, dy):
    active = (t >= start) & (t < start + duration)
    safe = np.where(duration > 0, duration, 1.0)
    return np.where(active, dy / safe * (1.0 - np.cos(2.0 * np.pi * (t - start) / safe)), 0.0)


def _simulate_np(state0, codes, params, t0, n_steps, dt, idm):
    half_lane, radius, veh_len, a_max, b_comf, headway, s0, expo = idm
    na = state0.shape[0]
    traj = np.empty((n_steps + 1, na, 4))
    traj[0] = state0
    sqrt_ab = 2.0 * math.sqrt(a_max * b_comf)
    is_idm = codes == IDM
    is_cruise = codes == CRUISE
    is_lc = codes == LANE_CHANGE
    eye = np.eye(na, dtype=bool)
    v0 = np.where(is_idm, params[:, 0], 1.0)
    for n in range(n_steps):
        t = t0 + n * dt
        t_next = t0 + (n + 1) * dt
        cur = traj[n]
        x, y, vx, vy = cur[:, 0], cur[:, 1], cur[:, 2], cur[:, 3]
        dx = x[None, :] - x[:, None]
        dy = np.abs(y[None, :] - y[:, None])
        cand = (dx > 0.0) & (dx <= radius) & (dy < half_lane) & ~eye
        key = np.where(cand, dx, np.inf)
        best_dx = key.min(axis=1)
        has_lead = np.isfinite(best_dx)
        tied = cand & (key == best_dx[:, None])
        lead_v = np.where(tied, vx[None, :], np.inf).min(axis=1)
        lead_v = np.where(has_lead, lead_v, 0.0)

        acc = 1.0 - (vx / v0) ** expo
        gap = np.maximum(np.where(has_lead, best_dx, 1.0) - veh_len, 0.1)
        s_star = s0 + np.maximum(0.0, vx * headway + vx * (vx - lead_v) / sqrt_ab)
        acc = acc - np.where(has_lead, (s_star / gap) ** 2, 0.0)
        v_idm = np.maximum(0.0, vx + a_max * acc * dt)

        braking = is_cruise & (t >= params[:, 0])
        v_cruise = np.where(braking, np.maximum(0.0, vx - params[:, 1] * dt), vx)

        lat_now = _lateral_speed_np(t, params[:, 0], params[:, 1], params[:, 2])
        lat_next = _lateral_speed_np(t_next, params[:, 0], params[:, 1], params[:, 2])

        new_vx = np.where(is_idm, v_idm, np.where(is_cruise, v_cruise, vx))
        nxt = traj[n + 1]
        nxt[:, 0] = x + new_vx * dt
        nxt[:, 1] = np.where(is_lc, y + lat_now * dt, np.where(is_idm | is_cruise, y, y + vy * dt))
        nxt[:, 2] = new_vx
        nxt[:, 3] = np.where(is_lc, lat_next, np.where(is_idm | is_cruise, 0.0, vy))
    return traj


def simulate(state0, codes, params, t0: float, n_steps: int, config: SimConfig = SimConfig(), use_numba=None) -> np.ndarray:
    """Roll all agents forward; returns (n_steps + 1, A, 4) states (x, y, vx, vy)."""
    use_numba = _accel.USE_NUMBA if use_numba is None else use_numba
    state0 = np.ascontiguousarray(state0, dtype=np.float64).reshape(-1, 4)
    codes = np.ascontiguousarray(codes, dtype=np.int64)
    params = np.ascontiguousarray(params, dtype=np.float64).reshape(-1, 3)
    fn = _simulate_nb if use_numba else _simulate_np
    return fn(state0, codes, params, float(t0), int(n_steps), float(config.dt), config.idm_array())
