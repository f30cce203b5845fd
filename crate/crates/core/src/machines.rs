//! Electric machine models: speeds, scaled loss polynomials, operating limits.
//!
//! The rear machine is scaled axially by `S_m`: iron and mechanical losses
//! scale linearly, copper losses through the active/end-winding length
//! ratio and the per-scale torque. The front in-wheel machine uses the same
//! loss family at a fixed scale of one.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num::Real;

pub mod fit;

/// Coefficients of the seven-term loss family.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossCoefficients {
    pub a_fe: f64,
    pub a_mech: f64,
    pub b_mech: f64,
    pub c_mech: f64,
    pub d_mech: f64,
    pub a_cu: f64,
    pub b_cu: f64,
}

/// Loss components, W.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Losses<T = f64> {
    pub iron: T,
    pub mech: T,
    pub copper: T,
}

impl<T: Real> Losses<T> {
    pub fn total(&self) -> T {
        self.iron + self.mech + self.copper
    }
}

impl LossCoefficients {
    pub fn iron<T: Real>(&self, s: T, omega: T) -> T {
        s * omega * self.a_fe
    }

    pub fn mech<T: Real>(&self, s: T, omega: T) -> T {
        s * (((omega * self.d_mech + self.c_mech) * omega + self.b_mech) * omega + self.a_mech)
    }

    /// Copper loss for a per-scale torque `tau`, multiplied by the winding
    /// length prefactor.
    pub fn copper<T: Real>(&self, prefactor: T, omega: T, tau: T) -> T {
        prefactor * (omega * omega * self.b_cu + self.a_cu) * tau * tau
    }
}

/// `(S·l_co + l_ew)/(l_co + l_ew)`: relative winding resistance of the
/// scaled machine.
pub fn copper_prefactor<T: Real>(s: T, l_co: f64, l_ew: f64) -> T {
    (s * l_co + l_ew) / (l_co + l_ew)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RearMotorModel {
    /// Reference peak power, W.
    pub p_max: f64,
    /// Reference peak torque, N·m.
    pub t_max: f64,
    pub omega_max: f64,
    /// Reference mass, kg.
    pub mbar_m: f64,
    pub loss: LossCoefficients,
    /// Active stack length, m.
    pub l_co: f64,
    /// End-winding length, m.
    pub l_ew: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrontMotorModel {
    pub p_max: f64,
    pub t_max: f64,
    pub omega_max: f64,
    /// Base speed where the torque and power limits meet, rad/s.
    pub omega_rated: f64,
    pub loss: LossCoefficients,
}

impl RearMotorModel {
    /// Synthetic reference machine standing in for a proprietary map
    /// (80 kW, 150 N·m, 1200 rad/s, 20 kg).
    pub fn synthetic_reference() -> Self {
        Self {
            p_max: 80_000.0,
            t_max: 150.0,
            omega_max: 1200.0,
            mbar_m: 20.0,
            loss: LossCoefficients {
                a_fe: 0.8,
                a_mech: 20.0,
                b_mech: 0.0,
                c_mech: 2e-4,
                d_mech: 2e-7,
                a_cu: 0.133,
                b_cu: 6.7e-8,
            },
            l_co: 0.05,
            l_ew: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_limits_positive(self.p_max, self.t_max, self.omega_max)?;
        if !(self.mbar_m >= 0.0) || !(self.l_co > 0.0) || !(self.l_ew > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rear motor",
                reason: "mass must be non-negative and winding lengths positive".into(),
            });
        }
        check_loss_grid(&self.loss, self.omega_max, self.t_max, "rear motor")
    }

    /// Losses at scale `s_m`, speed `omega` and shaft torque `torque`.
    pub fn losses<T: Real>(&self, s_m: T, omega: T, torque: T) -> Losses<T> {
        let tau = torque / s_m;
        Losses {
            iron: self.loss.iron(s_m, omega),
            mech: self.loss.mech(s_m, omega),
            copper: self
                .loss
                .copper(copper_prefactor(s_m, self.l_co, self.l_ew), omega, tau),
        }
    }
}

impl FrontMotorModel {
    /// Synthetic in-wheel machine (15 kW, 200 N·m, base speed 75 rad/s).
    pub fn synthetic_reference() -> Self {
        Self {
            p_max: 15_000.0,
            t_max: 200.0,
            omega_max: 250.0,
            omega_rated: 75.0,
            loss: LossCoefficients {
                a_fe: 1.0,
                a_mech: 5.0,
                b_mech: 0.0,
                c_mech: 1e-3,
                d_mech: 1e-6,
                a_cu: 0.03,
                b_cu: 5e-7,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_limits_positive(self.p_max, self.t_max, self.omega_max)?;
        if !(self.omega_rated > 0.0 && self.omega_rated <= self.omega_max) {
            return Err(Error::InvalidParameter {
                name: "front motor",
                reason: format!("rated speed {} outside (0, omega_max]", self.omega_rated),
            });
        }
        check_loss_grid(&self.loss, self.omega_max, self.t_max, "front motor")
    }

    pub fn losses<T: Real>(&self, omega: T, torque: T) -> Losses<T> {
        let one = T::cst(1.0);
        Losses {
            iron: self.loss.iron(one, omega),
            mech: self.loss.mech(one, omega),
            copper: self.loss.copper(one, omega, torque),
        }
    }

    /// Largest force magnitude the front motor can deliver at speed `v`.
    pub fn force_capacity(&self, v: f64, r_wf: f64) -> f64 {
        let torque = self.t_max / r_wf;
        if v > 0.0 {
            torque.min(self.p_max / v)
        } else {
            torque
        }
    }
}

fn check_limits_positive(p: f64, t: f64, w: f64) -> Result<()> {
    for (name, v) in [("p_max", p), ("t_max", t), ("omega_max", w)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("{v} must be positive"),
            });
        }
    }
    Ok(())
}

fn check_loss_grid(c: &LossCoefficients, omega_max: f64, t_max: f64, name: &'static str) -> Result<()> {
    const GRID: usize = 21;
    for i in 0..GRID {
        let w = omega_max * i as f64 / (GRID - 1) as f64;
        for j in 0..GRID {
            let t = t_max * (2.0 * j as f64 / (GRID - 1) as f64 - 1.0);
            let fe = c.iron(1.0, w);
            let me = c.mech(1.0, w);
            let cu = c.copper(1.0, w, t);
            if !(fe >= 0.0 && me >= 0.0 && cu >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("negative loss at omega = {w}, torque = {t}"),
                });
            }
        }
    }
    Ok(())
}

/// Rear machine speed, rad/s.
pub fn rear_speed<T: Real>(v: f64, gamma: T, r_wr: f64) -> T {
    gamma * (v / r_wr)
}

/// Front machine speed (direct drive), rad/s.
pub fn front_speed(v: f64, r_wf: f64) -> f64 {
    v / r_wf
}

/// Largest gear ratio that keeps the rear machine within its speed range up
/// to the vehicle top speed.
pub fn gamma_upper_bound(m: &RearMotorModel, r_wr: f64, v_max: f64) -> f64 {
    m.omega_max * r_wr / v_max
}

/// Rear shaft power for a wheel force `f`: traction draws through the
/// gearbox losses, regeneration delivers less.
pub fn rear_mech_power(f: f64, v: f64, eta_gb: f64) -> f64 {
    if f >= 0.0 {
        f * v / eta_gb
    } else {
        f * v * eta_gb
    }
}

/// Rear shaft torque for a wheel force, the torque form of `P_m / ω`.
pub fn rear_torque(f: f64, gamma: f64, r_wr: f64, eta_gb: f64) -> f64 {
    let wheel = if f >= 0.0 { f / eta_gb } else { f * eta_gb };
    wheel * r_wr / gamma
}

pub fn rear_losses(m: &RearMotorModel, s_m: f64, omega: f64, torque: f64) -> Result<Losses> {
    if !(s_m > 0.0) {
        return Err(Error::Domain {
            what: "S_m",
            value: s_m,
        });
    }
    check_speed(omega, m.omega_max)?;
    Ok(m.losses(s_m, omega, torque))
}

pub fn front_losses(m: &FrontMotorModel, omega: f64, torque: f64) -> Result<f64> {
    check_speed(omega, m.omega_max)?;
    Ok(m.losses(omega, torque).total())
}

fn check_speed(omega: f64, omega_max: f64) -> Result<()> {
    if !(omega >= 0.0) || omega > omega_max * (1.0 + 1e-9) {
        return Err(Error::Domain {
            what: "omega",
            value: omega,
        });
    }
    Ok(())
}

/// AC power drawn by both inverters' machines: shaft powers plus losses.
pub fn total_ac_power(front_mech: f64, front_loss: f64, rear_mech: f64, rear_loss: &Losses) -> f64 {
    front_mech + front_loss + rear_mech + rear_loss.copper + rear_loss.iron + rear_loss.mech
}

/// Operating point of both machines at one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorState {
    /// Front wheel force from the motor, N.
    pub front_force: f64,
    pub front_speed: f64,
    /// Rear shaft power, W.
    pub rear_power: f64,
    /// Rear shaft torque, N·m.
    pub rear_torque: f64,
    pub rear_speed: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LimitViolation {
    FrontPower { value: f64, limit: f64 },
    FrontTorque { value: f64, limit: f64 },
    FrontSpeed { value: f64, limit: f64 },
    RearPower { value: f64, limit: f64 },
    RearTorque { value: f64, limit: f64 },
    RearSpeed { value: f64, limit: f64 },
}

/// Checks power, torque and speed limits of both machines, symmetric in sign.
/// `rel_tol` is a relative allowance on each limit.
pub fn check_limits(
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    r_wf: f64,
    s_m: f64,
    state: &MotorState,
    rel_tol: f64,
) -> Vec<LimitViolation> {
    let mut out = Vec::new();
    let mut test = |value: f64, limit: f64, make: fn(f64, f64) -> LimitViolation| {
        if value.abs() > limit * (1.0 + rel_tol) {
            out.push(make(value, limit));
        }
    };
    let fp = state.front_force * state.front_speed * r_wf;
    test(fp, front.p_max, |value, limit| LimitViolation::FrontPower {
        value,
        limit,
    });
    test(state.front_force * r_wf, front.t_max, |value, limit| {
        LimitViolation::FrontTorque { value, limit }
    });
    test(state.front_speed, front.omega_max, |value, limit| {
        LimitViolation::FrontSpeed { value, limit }
    });
    test(state.rear_power, rear.p_max * s_m, |value, limit| {
        LimitViolation::RearPower { value, limit }
    });
    test(state.rear_torque, rear.t_max * s_m, |value, limit| {
        LimitViolation::RearTorque { value, limit }
    });
    test(state.rear_speed, rear.omega_max, |value, limit| {
        LimitViolation::RearSpeed { value, limit }
    });
    out
}

/// A sample of a measured loss map.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossMapSample {
    pub omega: f64,
    pub torque: f64,
    pub p_loss: f64,
}

/// Samples the reference-scale loss of `loss` on a regular grid of the
/// torque/speed envelope bounded by `t_max` and `p_max`.
pub fn synthetic_map(
    loss: &LossCoefficients,
    t_max: f64,
    p_max: f64,
    omega_max: f64,
    n_omega: usize,
    n_torque: usize,
) -> Vec<LossMapSample> {
    let mut out = Vec::with_capacity(n_omega * n_torque);
    for i in 0..n_omega {
        let omega = omega_max * i as f64 / (n_omega - 1).max(1) as f64;
        let cap = if omega > 0.0 { t_max.min(p_max / omega) } else { t_max };
        for j in 0..n_torque {
            let torque = cap * j as f64 / (n_torque - 1).max(1) as f64;
            let p_loss = loss.iron(1.0, omega) + loss.mech(1.0, omega) + loss.copper(1.0, omega, torque);
            out.push(LossMapSample { omega, torque, p_loss });
        }
    }
    out
}
