//! Vehicle constants, mass model and longitudinal power demand.

use alloc::format;

use crate::error::{Error, Result};
use crate::num::Real;

/// Speed below which the force demand is taken from the algebraic
/// expression instead of `P_v / v`.
pub const V_EPS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VehicleParams {
    /// Rider mass, kg.
    pub m_r: f64,
    /// Glider mass including the front motor, kg.
    pub m_0: f64,
    pub r_wf: f64,
    pub r_wr: f64,
    /// Centre-of-gravity height, m.
    pub h: f64,
    /// Longitudinal distance from the centre of gravity to the rear contact, m.
    pub b: f64,
    pub w_b: f64,
    pub c_r: f64,
    #[cfg_attr(feature = "serde", serde(rename = "CdA"))]
    pub cda: f64,
    /// Rear braking adherence limit (negative).
    pub mu_brk_peak_r: f64,
    pub rho: f64,
    pub g: f64,
    pub eta_gb: f64,
    pub eta_b: f64,
    pub eta_inv: f64,
    #[cfg_attr(feature = "serde", serde(rename = "P_aux"))]
    pub p_aux: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub v_max: f64,
    pub theta_max: f64,
    pub v_min_climb: f64,
    pub v_f: f64,
    pub t_a_max: f64,
    #[cfg_attr(feature = "serde", serde(rename = "D_r"))]
    pub d_r: f64,
    pub w_obj: f64,
    pub prone_drag_factor: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl VehicleParams {
    /// Reference superbike constants.
    pub fn reference() -> Self {
        Self {
            m_r: 80.0,
            m_0: 75.0,
            r_wf: 0.321,
            r_wr: 0.318,
            h: 0.573,
            b: 0.6935,
            w_b: 1.37,
            c_r: 0.015,
            cda: 0.32,
            mu_brk_peak_r: -0.8,
            rho: 1.25,
            g: 9.81,
            eta_gb: 0.96,
            eta_b: 0.92,
            eta_inv: 0.96,
            p_aux: 100.0,
            xi_min: 0.1,
            xi_max: 0.9,
            v_max: 250.0 / 3.6,
            theta_max: libm::atan(0.25),
            v_min_climb: 15.0 / 3.6,
            v_f: 100.0 / 3.6,
            t_a_max: 3.5,
            d_r: 100_000.0,
            w_obj: 1e3,
            prone_drag_factor: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_r", self.m_r),
            ("m_0", self.m_0),
            ("r_wf", self.r_wf),
            ("r_wr", self.r_wr),
            ("h", self.h),
            ("b", self.b),
            ("w_b", self.w_b),
            ("CdA", self.cda),
            ("rho", self.rho),
            ("g", self.g),
            ("v_max", self.v_max),
            ("v_f", self.v_f),
            ("t_a_max", self.t_a_max),
            ("D_r", self.d_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        for (name, v) in [
            ("eta_gb", self.eta_gb),
            ("eta_b", self.eta_b),
            ("eta_inv", self.eta_inv),
            ("prone_drag_factor", self.prone_drag_factor),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(name, format!("{v} must lie in (0, 1]")));
            }
        }
        if !(self.c_r >= 0.0) || !(self.p_aux >= 0.0) || !(self.w_obj >= 0.0) {
            return Err(invalid("c_r/P_aux/w_obj", "must be non-negative".into()));
        }
        if !(0.0 <= self.xi_min && self.xi_min < self.xi_max && self.xi_max <= 1.0) {
            return Err(invalid(
                "xi",
                format!("need 0 <= {} < {} <= 1", self.xi_min, self.xi_max),
            ));
        }
        if !(self.b < self.w_b) {
            return Err(invalid("b", "must be shorter than the wheelbase".into()));
        }
        if !(self.mu_brk_peak_r < 0.0) {
            return Err(invalid("mu_brk_peak_r", "must be negative".into()));
        }
        if !(self.theta_max >= 0.0) || !(self.v_min_climb >= 0.0) {
            return Err(invalid("theta_max/v_min_climb", "must be non-negative".into()));
        }
        Ok(())
    }

    pub fn m_fixed(&self) -> f64 {
        self.m_0 + self.m_r
    }

    pub fn prone_cda(&self) -> f64 {
        self.prone_drag_factor * self.cda
    }

    /// Usable state-of-charge window.
    pub fn soc_window(&self) -> f64 {
        self.xi_max - self.xi_min
    }
}

fn invalid(name: &'static str, reason: alloc::string::String) -> Error {
    Error::InvalidParameter { name, reason }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MassBreakdown {
    pub m_total: f64,
    pub m_battery: f64,
    pub m_rear_motor: f64,
    pub m_fixed: f64,
}

pub fn total_mass(p: &VehicleParams, mbar_b: f64, mbar_m: f64, s_b: f64, s_m: f64) -> Result<MassBreakdown> {
    if !(s_b > 0.0) {
        return Err(Error::Domain {
            what: "S_b",
            value: s_b,
        });
    }
    if !(s_m > 0.0) {
        return Err(Error::Domain {
            what: "S_m",
            value: s_m,
        });
    }
    let m_battery = mbar_b * s_b;
    let m_rear_motor = mbar_m * s_m;
    let m_fixed = p.m_fixed();
    Ok(MassBreakdown {
        m_total: m_fixed + m_battery + m_rear_motor,
        m_battery,
        m_rear_motor,
        m_fixed,
    })
}

/// Mass as a function of the scale factors, for use with automatic
/// differentiation.
pub fn mass<T: Real>(p: &VehicleParams, mbar_b: f64, mbar_m: f64, s_b: T, s_m: T) -> T {
    s_b * mbar_b + s_m * mbar_m + p.m_fixed()
}

/// Road-load force per unit mass, `c_r·g·cosθ + g·sinθ + a`.
pub fn specific_road_load(p: &VehicleParams, a: f64, theta: f64) -> f64 {
    p.c_r * p.g * libm::cos(theta) + p.g * libm::sin(theta) + a
}

pub fn drag_force(p: &VehicleParams, v: f64) -> f64 {
    0.5 * p.rho * p.cda * v * v
}

/// Power required at the wheels, W.
pub fn required_power<T: Real>(p: &VehicleParams, m: T, v: f64, a: f64, theta: f64) -> T {
    m * (v * specific_road_load(p, a, theta)) + 0.5 * p.rho * p.cda * v * v * v
}

/// Longitudinal force demand, N.
pub fn required_force<T: Real>(p: &VehicleParams, m: T, v: f64, a: f64, theta: f64) -> T {
    if v >= V_EPS {
        required_power(p, m, v, a, theta) / v
    } else {
        m * specific_road_load(p, a, theta) + drag_force(p, v)
    }
}

/// Force the powertrain must deliver. A parked vehicle (`v = 0`, no
/// acceleration) is held by its brakes with the machines switched off.
pub fn demand_force<T: Real>(p: &VehicleParams, m: T, v: f64, a: f64, theta: f64) -> T {
    if is_parked(v, a) {
        T::cst(0.0)
    } else {
        required_force(p, m, v, a, theta)
    }
}

pub fn is_parked(v: f64, a: f64) -> bool {
    v == 0.0 && a <= 0.0
}
