//! Inverter and battery power chain, energy integration and pack sizing.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vehicle::VehicleParams;

pub const J_PER_WH: f64 = 3600.0;
pub const J_PER_KWH: f64 = 3.6e6;

/// Reference pack, scaled linearly by `S_b`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatteryModel {
    /// Reference capacity, J.
    pub ebar_max: f64,
    /// Reference mass, kg.
    pub mbar_b: f64,
    pub eta_b: f64,
    pub xi_min: f64,
    pub xi_max: f64,
}

impl BatteryModel {
    /// 10 kWh, 50 kg reference pack (modelling assumption).
    pub fn synthetic_reference(p: &VehicleParams) -> Self {
        Self::from_params(p, 10.0 * J_PER_KWH, 50.0)
    }

    pub fn from_params(p: &VehicleParams, ebar_max: f64, mbar_b: f64) -> Self {
        Self {
            ebar_max,
            mbar_b,
            eta_b: p.eta_b,
            xi_min: p.xi_min,
            xi_max: p.xi_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ebar_max > 0.0) {
            return Err(Error::Domain {
                what: "battery reference capacity",
                value: self.ebar_max,
            });
        }
        if !(self.mbar_b >= 0.0) {
            return Err(Error::Domain {
                what: "battery reference mass",
                value: self.mbar_b,
            });
        }
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return Err(Error::Domain {
                what: "eta_b",
                value: self.eta_b,
            });
        }
        if !(0.0 <= self.xi_min && self.xi_min < self.xi_max && self.xi_max <= 1.0) {
            return Err(Error::Domain {
                what: "xi_max",
                value: self.xi_max,
            });
        }
        Ok(())
    }

    pub fn capacity(&self, s_b: f64) -> f64 {
        s_b * self.ebar_max
    }

    pub fn scale_for_capacity(&self, e_max: f64) -> f64 {
        e_max / self.ebar_max
    }

    pub fn initial_energy(&self, s_b: f64) -> f64 {
        self.xi_max * self.capacity(s_b)
    }

    pub fn usable_energy(&self, s_b: f64) -> f64 {
        (self.xi_max - self.xi_min) * self.capacity(s_b)
    }

    /// Smallest scale whose usable window holds `e_c` joules.
    pub fn min_scale(&self, e_c: f64) -> f64 {
        e_c / ((self.xi_max - self.xi_min) * self.ebar_max)
    }
}

/// DC power drawn by the inverter and auxiliaries for an AC motor power.
pub fn inverter_dc_power(p_ac: f64, eta_inv: f64, p_aux: f64) -> f64 {
    if p_ac >= 0.0 {
        p_ac / eta_inv + p_aux
    } else {
        p_ac * eta_inv + p_aux
    }
}

/// Power drawn from the cells for a DC bus demand `q`.
pub fn cell_power(q: f64, eta_b: f64) -> f64 {
    if q >= 0.0 {
        q / eta_b
    } else {
        q * eta_b
    }
}

/// Battery power for an AC motor power: inverter stage, auxiliaries, then
/// cell losses.
pub fn battery_power(p_ac: f64, p_aux: f64, eta_inv: f64, eta_b: f64) -> f64 {
    cell_power(inverter_dc_power(p_ac, eta_inv, p_aux), eta_b)
}

/// Stored energy before and after every step, `N + 1` values, with
/// compensated summation of `P_b·dt`.
pub fn integrate(e0: f64, p_b: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p_b.len() + 1);
    out.push(e0);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &p in p_b {
        let x = p * dt;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(e0 - (sum + comp));
    }
    out
}

/// Energy drawn over the cycle, J.
pub fn consumed(e_b: &[f64]) -> f64 {
    match (e_b.first(), e_b.last()) {
        (Some(a), Some(b)) => a - b,
        _ => 0.0,
    }
}

/// First index where the stored energy leaves `[ξmin, ξmax]·S_b·Ē` beyond `tol` joules.
pub fn soc_violation(model: &BatteryModel, s_b: f64, e_b: &[f64], tol: f64) -> Option<usize> {
    let lo = model.xi_min * model.capacity(s_b) - tol;
    let hi = model.xi_max * model.capacity(s_b) + tol;
    e_b.iter().position(|e| *e < lo || *e > hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_stage_hand_values() {
        let p = VehicleParams::reference();
        let pb = battery_power(10_000.0, p.p_aux, p.eta_inv, p.eta_b);
        let hand = (10_000.0 / 0.96 + 100.0) / 0.92;
        assert!((pb - hand).abs() < 1e-9);
        assert!((pb - 11_431.2).abs() < 0.1);
        let pb = battery_power(-10_000.0, p.p_aux, p.eta_inv, p.eta_b);
        assert!((pb - (-9_600.0 + 100.0) * 0.92).abs() < 1e-9);
        assert!((pb + 8_740.0).abs() < 1e-9);
    }

    #[test]
    fn auxiliaries_at_rest() {
        let p = VehicleParams::reference();
        let pb = battery_power(0.0, p.p_aux, p.eta_inv, p.eta_b);
        assert!((pb - 100.0 / 0.92).abs() < 1e-12);
    }

    #[test]
    fn light_regeneration_still_draws() {
        // recovered power below the auxiliary load
        let p = VehicleParams::reference();
        let pb = battery_power(-50.0, p.p_aux, p.eta_inv, p.eta_b);
        assert!((pb - (100.0 - 48.0) / 0.92).abs() < 1e-12);
    }

    #[test]
    fn constant_draw() {
        let e = integrate(1000.0, &[5.0; 10], 1.0);
        assert_eq!(e.len(), 11);
        assert!((consumed(&e) - 50.0).abs() < 1e-12);
        assert_eq!(e[10], 950.0);
    }

    #[test]
    fn sizing_round_trip() {
        let p = VehicleParams::reference();
        let b = BatteryModel::synthetic_reference(&p);
        b.validate().unwrap();
        let s = b.scale_for_capacity(10.04 * J_PER_KWH);
        assert!((b.capacity(s) / J_PER_KWH - 10.04).abs() < 1e-12);
        let e_c = 3.0 * J_PER_KWH;
        let s = b.min_scale(e_c);
        assert!((b.usable_energy(s) - e_c).abs() < 1e-6);
    }

    #[test]
    fn soc_window_check() {
        let p = VehicleParams::reference();
        let b = BatteryModel::synthetic_reference(&p);
        let e0 = b.initial_energy(1.0);
        let e = integrate(e0, &[1e6; 30], 1.0);
        assert_eq!(soc_violation(&b, 1.0, &e, 1e-6), Some(29));
    }

    proptest! {
        #[test]
        fn integration_matches_sum(ps in proptest::collection::vec(-2e4f64..5e4, 1..400), dt in 0.1f64..2.0) {
            let e = integrate(0.0, &ps, dt);
            prop_assert_eq!(e.len(), ps.len() + 1);
            let direct: f64 = ps.iter().map(|p| p * dt).sum();
            let scale: f64 = ps.iter().map(|p| (p * dt).abs()).sum::<f64>().max(1.0);
            prop_assert!((consumed(&e) - direct).abs() <= 1e-12 * scale);
            for k in 0..ps.len() {
                prop_assert!((e[k] - e[k + 1] - ps[k] * dt).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn chain_is_monotone_and_lossy(p_ac in -5e4f64..8e4, dp in 1.0f64..1e3) {
            let p = VehicleParams::reference();
            let f = |x| battery_power(x, p.p_aux, p.eta_inv, p.eta_b);
            prop_assert!(f(p_ac + dp) > f(p_ac));
            prop_assert!(f(p_ac) >= p_ac + p.p_aux - 1e-9 * p_ac.abs());
            prop_assert!(f(p_ac) >= p_ac * p.eta_inv * p.eta_b + p.p_aux * p.eta_b - 1e-9 * p_ac.abs());
        }

        #[test]
        fn capacity_rescaling_is_invariant(e in 1e6f64..1e8, scale in 0.2f64..5.0) {
            let p = VehicleParams::reference();
            let a = BatteryModel::from_params(&p, 3.6e7, 50.0);
            let b = BatteryModel::from_params(&p, 3.6e7 * scale, 50.0 * scale);
            let (sa, sb) = (a.scale_for_capacity(e), b.scale_for_capacity(e));
            prop_assert!((a.capacity(sa) - b.capacity(sb)).abs() <= 1e-9 * e);
            prop_assert!((sa * a.mbar_b - sb * b.mbar_b).abs() <= 1e-9 * sa * a.mbar_b);
        }
    }
}
