//! Front/rear force distribution: adherence split, rear lock limit, serial
//! braking and saturation transfer.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::vehicle::VehicleParams;

/// Adherence-optimal front share for a net longitudinal force `x_total`.
/// May fall outside `[0, 1]`.
pub fn sigma_adherence_raw<T: Real>(p: &VehicleParams, m: T, x_total: T, theta: f64) -> T {
    let normal = m * (p.g * libm::cos(theta));
    -(x_total / normal - p.c_r) * (p.h / p.w_b) + p.b / p.w_b
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaAdherence {
    pub raw: f64,
    /// Raw value clamped to `[0, 1]`, usable as an actuated split.
    pub clamped: f64,
}

pub fn sigma_adherence(p: &VehicleParams, m: f64, x_total: f64, theta: f64) -> SigmaAdherence {
    let raw = sigma_adherence_raw(p, m, x_total, theta);
    SigmaAdherence {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    }
}

/// Rear normal-load term `(m g cosθ/w_b)(w_b − b − h c_r) + (h/w_b)(X_f + X_r)`,
/// the denominator of the rear adherence ratio.
pub fn rear_load<T: Real>(p: &VehicleParams, m: T, x_total: T, theta: f64) -> T {
    m * (p.g * libm::cos(theta) / p.w_b * (p.w_b - p.b - p.h * p.c_r)) + x_total * (p.h / p.w_b)
}

/// Rear adherence utilisation `μʳ` for net wheel forces `x_f`, `x_r`.
pub fn rear_adherence(p: &VehicleParams, m: f64, x_f: f64, x_r: f64, theta: f64) -> Result<f64> {
    let load = rear_load(p, m, x_f + x_r, theta);
    if !(load > 0.0) {
        return Err(Error::WheelLift { load });
    }
    Ok(x_r / load)
}

/// Splits a force demand into front and rear parts.
pub fn split_demand(f_v: f64, sigma: f64) -> (f64, f64) {
    let front = sigma * f_v;
    (front, f_v - front)
}

/// Serves a braking demand `f_wheel ≤ 0` with regeneration first, then with
/// the friction brake. Returns `(motor, brake)`.
pub fn serial_brake_repartition(f_wheel: f64, capacity: f64) -> (f64, f64) {
    let motor = f_wheel.max(-capacity);
    (motor, f_wheel - motor)
}

/// Traction demand in excess of the front motor capacity, moved to the rear.
pub fn saturation_transfer(f_v_f: f64, capacity: f64) -> f64 {
    (f_v_f - capacity).max(0.0)
}

/// Force distribution at one step, N.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlendState {
    pub sigma: f64,
    pub f_v_f: f64,
    /// Rear demand including the transferred force.
    pub f_v_r: f64,
    pub f_m_f: f64,
    pub f_m_r: f64,
    pub f_brk_f: f64,
    pub f_brk_r: f64,
    pub f_tr_f: f64,
    pub mu_r: f64,
}

impl BlendState {
    /// Net front and rear wheel forces.
    pub fn wheel_forces(&self) -> (f64, f64) {
        (self.f_m_f + self.f_brk_f, self.f_m_r + self.f_brk_r)
    }

    /// Largest residual of the two balance equations.
    pub fn balance_residual(&self) -> f64 {
        let front = self.f_v_f - (self.f_m_f + self.f_brk_f + self.f_tr_f);
        let rear = self.f_v_r - (self.f_m_r + self.f_brk_r);
        front.abs().max(rear.abs())
    }

    /// Most negative coherence product (zero if all hold).
    pub fn coherence_residual(&self) -> f64 {
        (self.f_m_f * self.f_m_r)
            .min(self.f_m_f * self.f_brk_f)
            .min(self.f_m_r * self.f_brk_r)
            .min(0.0)
    }

    /// Sign constraints on brakes and transfer.
    pub fn signs_ok(&self, tol: f64) -> bool {
        self.f_brk_f <= tol && self.f_brk_r <= tol && self.f_tr_f >= -tol
    }
}
