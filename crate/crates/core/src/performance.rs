//! Acceleration, top speed, gradeability and range requirements.
//!
//! Every margin is written as `capability − requirement`, so a requirement is
//! met when its margin is non-negative. The functions are generic over
//! [`Real`] so the optimiser can differentiate them.

use crate::machines::{FrontMotorModel, RearMotorModel};
use crate::num::Real;
use crate::vehicle::VehicleParams;

/// Time to reach `p.v_f` from rest at full torque on both axles, without
/// aerodynamic drag.
///
/// The front motor delivers constant force up to its base speed and constant
/// power above it; the rear delivers constant force `S_m γ T̄ η_gb / r_wr`.
pub fn accel_time<T: Real>(
    p: &VehicleParams,
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    m: T,
    s_m: T,
    gamma: T,
) -> T {
    let k_f = front.t_max / p.r_wf;
    let k_r = s_m * gamma * (rear.t_max * p.eta_gb / p.r_wr);
    let v_r = front.omega_rated * p.r_wf;
    if v_r >= p.v_f {
        return m * p.v_f / (k_r + k_f);
    }
    let p_f = front.p_max;
    let dv = p.v_f - v_r;
    let t1 = m * v_r / (k_r + k_f);
    // (m/K)·[Δv − (P/K)·ln(1 + y)] with y = K·Δv/(P + K·v_r), rearranged
    // to stay accurate as K → 0
    let u = k_r.recip() * p_f;
    let y = k_r * dv / (k_r * v_r + p_f);
    let t2 = m / k_r * (u * y_minus_ln_1p(y) + y * v_r);
    t1 + t2
}

/// `y − ln(1 + y)` for `y > −1`, by series near zero.
fn y_minus_ln_1p<T: Real>(y: T) -> T {
    if libm::fabs(y.value()) < 0.05 {
        let mut term = y * y;
        let mut sum = term * 0.5;
        for n in 3..16 {
            term = term * y;
            let c = if n % 2 == 1 { -1.0 } else { 1.0 } / n as f64;
            sum = sum + term * c;
        }
        sum
    } else {
        y - (y + 1.0).ln()
    }
}

pub fn accel_margin<T: Real>(
    p: &VehicleParams,
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    m: T,
    s_m: T,
    gamma: T,
) -> T {
    -accel_time(p, front, rear, m, s_m, gamma) + p.t_a_max
}

/// Installed power at the wheels minus prone-position road load at `v_max`.
pub fn top_speed_margin<T: Real>(p: &VehicleParams, front: &FrontMotorModel, rear: &RearMotorModel, m: T, s_m: T) -> T {
    let v = p.v_max;
    let drag = 0.5 * p.rho * p.prone_cda() * v * v * v;
    s_m * (rear.p_max * p.eta_gb) + front.p_max - drag - m * (p.g * p.c_r * v)
}

/// Installed power minus the climbing power on the steepest grade.
pub fn power_grade_margin<T: Real>(
    p: &VehicleParams,
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    m: T,
    s_m: T,
) -> T {
    s_m * (rear.p_max * p.eta_gb) + front.p_max - m * (p.g * libm::sin(p.theta_max) * p.v_min_climb)
}

/// Peak wheel force minus the gravity component on the steepest grade.
pub fn torque_grade_margin<T: Real>(
    p: &VehicleParams,
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    m: T,
    s_m: T,
    gamma: T,
) -> T {
    s_m * gamma * (rear.t_max / p.r_wr) + front.t_max / p.r_wf - m * (p.g * libm::sin(p.theta_max))
}

/// Usable battery energy, pro rata over the required range, minus the energy
/// `e_c` (J) consumed on a cycle of length `d_c` (m).
pub fn range_margin<T: Real>(p: &VehicleParams, ebar_max: f64, s_b: T, e_c: T, d_c: f64) -> T {
    s_b * (p.soc_window() * ebar_max * d_c / p.d_r) - e_c
}

/// Smallest rear machine scale meeting the four vehicle targets when the
/// rest of the vehicle weighs `m_rest`. Targets that no scale can meet give
/// `f64::INFINITY`.
pub fn min_motor_scale(
    p: &VehicleParams,
    front: &FrontMotorModel,
    rear: &RearMotorModel,
    m_rest: f64,
    gamma: f64,
) -> f64 {
    let mm = rear.mbar_m;
    // each linear target reads slope·S + intercept >= 0
    let linear = |slope: f64, intercept: f64| {
        if intercept >= 0.0 {
            0.0
        } else if slope > 0.0 {
            -intercept / slope
        } else {
            f64::INFINITY
        }
    };
    let at = |s: f64| (m_rest + mm * s, s);
    let affine = |f: &dyn Fn(f64, f64) -> f64| {
        let (m0, s0) = at(0.0);
        let (m1, s1) = at(1.0);
        let c0 = f(m0, s0);
        (f(m1, s1) - c0, c0)
    };
    let (a, b) = affine(&|m, s| top_speed_margin(p, front, rear, m, s));
    let top = linear(a, b);
    let (a, b) = affine(&|m, s| power_grade_margin(p, front, rear, m, s));
    let grade_p = linear(a, b);
    let (a, b) = affine(&|m, s| torque_grade_margin(p, front, rear, m, s, gamma));
    let grade_t = linear(a, b);

    let accel_ok = |s: f64| {
        let (m, s) = at(s);
        accel_margin(p, front, rear, m, s, gamma) >= 0.0
    };
    let accel = if accel_ok(1e-9) {
        0.0
    } else {
        let mut hi = 1.0;
        while !accel_ok(hi) && hi < 1e4 {
            hi *= 2.0;
        }
        if !accel_ok(hi) {
            f64::INFINITY
        } else {
            let mut lo = hi / 2.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if accel_ok(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    };
    top.max(grade_p).max(grade_t).max(accel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerformanceReport {
    pub accel_time: f64,
    pub accel: f64,
    pub top_speed: f64,
    pub power_grade: f64,
    pub torque_grade: f64,
    pub range: f64,
}

impl PerformanceReport {
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        p: &VehicleParams,
        front: &FrontMotorModel,
        rear: &RearMotorModel,
        ebar_max: f64,
        m: f64,
        gamma: f64,
        s_m: f64,
        s_b: f64,
        e_c: f64,
        d_c: f64,
    ) -> Self {
        let accel_time = accel_time(p, front, rear, m, s_m, gamma);
        Self {
            accel_time,
            accel: p.t_a_max - accel_time,
            top_speed: top_speed_margin(p, front, rear, m, s_m),
            power_grade: power_grade_margin(p, front, rear, m, s_m),
            torque_grade: torque_grade_margin(p, front, rear, m, s_m, gamma),
            range: range_margin(p, ebar_max, s_b, e_c, d_c),
        }
    }

    /// Margins in the order accel, top speed, power grade, torque grade, range.
    pub fn margins(&self) -> [f64; 5] {
        [
            self.accel,
            self.top_speed,
            self.power_grade,
            self.torque_grade,
            self.range,
        ]
    }

    /// True when every margin is at least `-tol·scale`, with each margin
    /// scaled by its own requirement.
    pub fn all_met(&self, scales: &[f64; 5], tol: f64) -> bool {
        self.margins().iter().zip(scales).all(|(m, s)| *m >= -tol * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup() -> (VehicleParams, FrontMotorModel, RearMotorModel) {
        (
            VehicleParams::reference(),
            FrontMotorModel::synthetic_reference(),
            RearMotorModel::synthetic_reference(),
        )
    }

    /// Fixed-step RK4 on the same force model.
    fn rk4_time(p: &VehicleParams, f: &FrontMotorModel, r: &RearMotorModel, m: f64, s_m: f64, gamma: f64) -> f64 {
        let k_r = s_m * gamma * r.t_max * p.eta_gb / p.r_wr;
        let force = |v: f64| {
            let front = if v * f.t_max / p.r_wf <= f.p_max {
                f.t_max / p.r_wf
            } else {
                f.p_max / v
            };
            front + k_r
        };
        // integrate dt/dv = m / F(v) over speed
        let n = 200_000;
        let h = p.v_f / n as f64;
        let g = |v: f64| m / force(v);
        let mut t = 0.0;
        for i in 0..n {
            let v = i as f64 * h;
            t += h / 6.0 * (g(v) + 4.0 * g(v + 0.5 * h) + g(v + h));
        }
        t
    }

    #[test]
    fn accel_matches_quadrature() {
        let (p, f, r) = setup();
        for (m, s_m, gamma) in [(200.0, 0.6, 4.0), (260.0, 1.2, 5.0), (180.0, 0.3, 1.5)] {
            let exact = accel_time(&p, &f, &r, m, s_m, gamma);
            let oracle = rk4_time(&p, &f, &r, m, s_m, gamma);
            assert!((exact - oracle).abs() <= 1e-6 * oracle, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn accel_without_power_phase() {
        let (mut p, mut f, r) = setup();
        f.omega_rated = f.omega_max;
        f.p_max = f.t_max * f.omega_rated;
        p.v_f = 20.0;
        let t = accel_time(&p, &f, &r, 200.0, 1.0, 3.0);
        let k = f.t_max / p.r_wf + 3.0 * r.t_max * p.eta_gb / p.r_wr;
        assert!((t - 200.0 * 20.0 / k).abs() < 1e-12);
    }

    #[test]
    fn top_speed_hand_value() {
        let (p, f, r) = setup();
        let v = 250.0 / 3.6;
        let need = 0.5 * 1.25 * 0.9 * 0.32 * v * v * v + 200.0 * 9.81 * 0.015 * v;
        let have = 15_000.0 + 0.7 * 80_000.0 * 0.96;
        let m = top_speed_margin(&p, &f, &r, 200.0, 0.7);
        assert!((m - (have - need)).abs() < 1e-6);
    }

    #[test]
    fn gradeability_hand_values() {
        let (p, f, r) = setup();
        let sin = 0.25 / (1.0f64 + 0.0625).sqrt();
        let pg = power_grade_margin(&p, &f, &r, 220.0, 0.5);
        assert!((pg - (15_000.0 + 0.5 * 80_000.0 * 0.96 - 220.0 * 9.81 * sin * 15.0 / 3.6)).abs() < 1e-6);
        let tg = torque_grade_margin(&p, &f, &r, 220.0, 0.5, 4.0);
        assert!((tg - (200.0 / 0.321 + 0.5 * 150.0 * 4.0 / 0.318 - 220.0 * 9.81 * sin)).abs() < 1e-6);
    }

    #[test]
    fn range_pro_rata() {
        let p = VehicleParams::reference();
        // 10.04 kWh pack covering 80.31 Wh/km over 100 km
        let ebar = 3.6e6;
        let d_c = 10_000.0;
        let e_c = 80.31 * 10.0 * 3600.0;
        let s_b = 10.04 / 0.8;
        let m = range_margin(&p, ebar, s_b, e_c, d_c);
        let window = 10.04 * 3.6e6 * 0.1;
        assert!((m - (window - e_c)).abs() < 1e-6);
    }

    #[test]
    fn minimum_scale_meets_every_target() {
        let (p, f, r) = setup();
        let m_rest = p.m_fixed() + 50.0;
        for gamma in [2.0, 4.0, 5.49] {
            let s = min_motor_scale(&p, &f, &r, m_rest, gamma);
            let m = m_rest + r.mbar_m * s;
            let margins = [
                accel_margin(&p, &f, &r, m, s, gamma),
                top_speed_margin(&p, &f, &r, m, s),
                power_grade_margin(&p, &f, &r, m, s),
                torque_grade_margin(&p, &f, &r, m, s, gamma),
            ];
            assert!(margins.iter().all(|x| *x >= -1e-6), "{margins:?}");
            // at least one target is tight
            assert!(margins.iter().any(|x| x.abs() <= 1e-6), "{margins:?}");
        }
    }

    #[test]
    fn accel_small_rear_force_limit() {
        // as the rear force vanishes the power phase tends to m·(v_f² − v_r²)/(2P)
        let (p, f, r) = setup();
        let m = 200.0;
        let v_r = f.omega_rated * p.r_wf;
        let k_f = f.t_max / p.r_wf;
        let limit = m * v_r / k_f + m * (p.v_f * p.v_f - v_r * v_r) / (2.0 * f.p_max);
        let t = accel_time(&p, &f, &r, m, 1e-9, 1.0);
        assert!((t - limit).abs() <= 1e-6 * limit, "{t} vs {limit}");
        for s in [1e-6, 1e-3, 0.03, 0.3] {
            let exact = accel_time(&p, &f, &r, m, s, 2.0);
            let oracle = rk4_time(&p, &f, &r, m, s, 2.0);
            assert!((exact - oracle).abs() <= 1e-6 * oracle, "{s}: {exact} vs {oracle}");
        }
    }

    proptest! {
        #[test]
        fn accel_improves_with_torque(m in 150.0f64..350.0, s_m in 0.2f64..3.0, gamma in 1.0f64..6.0, d in 0.01f64..0.5) {
            let (p, f, r) = setup();
            let t0 = accel_time(&p, &f, &r, m, s_m, gamma);
            prop_assert!(t0 > 0.0);
            prop_assert!(accel_time(&p, &f, &r, m, s_m + d, gamma) < t0);
            prop_assert!(accel_time(&p, &f, &r, m, s_m, gamma + d) < t0);
            prop_assert!(accel_time(&p, &f, &r, m + 10.0 * d, s_m, gamma) > t0);
            // time scales linearly with mass
            let t2 = accel_time(&p, &f, &r, 2.0 * m, s_m, gamma);
            prop_assert!((t2 - 2.0 * t0).abs() <= 1e-12 * t0);
        }

        #[test]
        fn margins_monotone_in_scale(m in 150.0f64..350.0, s_m in 0.1f64..3.0, gamma in 1.0f64..6.0) {
            let (p, f, r) = setup();
            let dm = 1.0;
            prop_assert!(top_speed_margin(&p, &f, &r, m, s_m + 0.1) > top_speed_margin(&p, &f, &r, m, s_m));
            prop_assert!(top_speed_margin(&p, &f, &r, m + dm, s_m) < top_speed_margin(&p, &f, &r, m, s_m));
            prop_assert!(power_grade_margin(&p, &f, &r, m + dm, s_m) < power_grade_margin(&p, &f, &r, m, s_m));
            prop_assert!(torque_grade_margin(&p, &f, &r, m, s_m, gamma + 0.1) > torque_grade_margin(&p, &f, &r, m, s_m, gamma));
        }
    }
}
