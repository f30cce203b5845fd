//! Driving cycles: uniformly sampled speed and grade traces.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Tolerance of the supplied-acceleration consistency check, m/s².
pub const ACCEL_TOLERANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrivingCycle {
    pub name: String,
    pub dt: f64,
    pub t: Vec<f64>,
    /// Speed, m/s.
    pub v: Vec<f64>,
    /// Forward-difference acceleration, m/s²; the last sample is zero.
    pub a: Vec<f64>,
    /// Road grade angle, rad.
    pub theta: Vec<f64>,
    /// Distance `Σ v·dt`, m.
    pub length_m: f64,
}

impl DrivingCycle {
    /// Builds a cycle on the grid `t0 + k·dt` from speed samples.
    pub fn new(name: impl Into<String>, dt: f64, v: Vec<f64>, theta: Option<Vec<f64>>) -> Result<Self> {
        let t = (0..v.len()).map(|k| k as f64 * dt).collect();
        Self::from_samples(name, t, v, None, theta)
    }

    /// Validates raw samples. A supplied acceleration column is only checked
    /// against the speed trace; the stored acceleration is always recomputed.
    pub fn from_samples(
        name: impl Into<String>,
        t: Vec<f64>,
        v: Vec<f64>,
        a: Option<Vec<f64>>,
        theta: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = v.len();
        if n < 2 {
            return Err(Error::TooShort(n));
        }
        if t.len() != n {
            return Err(Error::LengthMismatch("time and speed"));
        }
        let theta = theta.unwrap_or_else(|| alloc::vec![0.0; n]);
        if theta.len() != n {
            return Err(Error::LengthMismatch("grade and speed"));
        }
        for (field, xs) in [("t", &t), ("v", &v), ("theta", &theta)] {
            if let Some(index) = xs.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { field, index });
            }
        }
        let dt = t[1] - t[0];
        if !(dt > 0.0) {
            return Err(Error::NonUniformGrid { index: 1 });
        }
        for k in 1..n {
            if ((t[k] - t[k - 1]) - dt).abs() > 1e-6 * dt.max(1e-3) {
                return Err(Error::NonUniformGrid { index: k });
            }
        }
        if let Some(index) = v.iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeSpeed { index, value: v[index] });
        }
        let acc = forward_difference(&v, dt);
        if let Some(sup) = a {
            if sup.len() != n {
                return Err(Error::LengthMismatch("acceleration and speed"));
            }
            for k in 0..n - 1 {
                if !sup[k].is_finite() {
                    return Err(Error::NonFinite { field: "a", index: k });
                }
                if (sup[k] - acc[k]).abs() > ACCEL_TOLERANCE {
                    return Err(Error::InconsistentAcceleration {
                        index: k,
                        supplied: sup[k],
                        computed: acc[k],
                    });
                }
            }
        }
        let length_m = distance(&v, dt);
        if !(length_m > 0.0) {
            return Err(Error::ZeroLength);
        }
        Ok(Self {
            name: name.into(),
            dt,
            t,
            v,
            a: acc,
            theta,
            length_m,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t[self.len() - 1] - self.t[0]
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }

    /// True if any step decelerates.
    pub fn has_braking(&self) -> bool {
        self.a.iter().any(|&a| a < 0.0)
    }

    /// Linear interpolation of speed and grade onto a grid of step `dt_new`
    /// covering the original duration.
    pub fn resample(&self, dt_new: f64) -> Result<Self> {
        if !(dt_new > 0.0) {
            return Err(Error::Domain {
                what: "dt",
                value: dt_new,
            });
        }
        let duration = self.duration();
        if dt_new > duration {
            return Err(Error::StepTooLarge { dt: dt_new, duration });
        }
        let t0 = self.t[0];
        let steps = libm::floor(duration / dt_new + 1e-9) as usize;
        let mut t = Vec::with_capacity(steps + 1);
        let mut v = Vec::with_capacity(steps + 1);
        let mut theta = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let tk = t0 + k as f64 * dt_new;
            let x = (tk - t0) / self.dt;
            let i = (libm::floor(x + 1e-9) as usize).min(self.len() - 1);
            let frac = (x - i as f64).max(0.0);
            let lerp = |ys: &[f64]| {
                if i + 1 < ys.len() && frac > 1e-12 {
                    ys[i] + frac * (ys[i + 1] - ys[i])
                } else {
                    ys[i]
                }
            };
            t.push(tk);
            v.push(lerp(&self.v).max(0.0));
            theta.push(lerp(&self.theta));
        }
        Self::from_samples(self.name.clone(), t, v, None, Some(theta))
    }
}

/// Converts a slope given in percent (rise over run) to an angle in radians.
pub fn percent_to_rad(percent: f64) -> f64 {
    libm::atan(percent / 100.0)
}

fn forward_difference(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    let mut a: Vec<f64> = (0..n - 1).map(|k| (v[k + 1] - v[k]) / dt).collect();
    a.push(0.0);
    a
}

fn distance(v: &[f64], dt: f64) -> f64 {
    v.iter().sum::<f64>() * dt
}

/// Builds a cycle by sampling a piecewise-linear speed profile given as
/// `(time s, speed km/h)` knots.
pub fn from_knots_kmh(name: &str, knots: &[(f64, f64)], dt: f64) -> Result<DrivingCycle> {
    let end = knots.last().map(|k| k.0).unwrap_or(0.0);
    let steps = libm::floor(end / dt + 1e-9) as usize;
    let mut v = Vec::with_capacity(steps + 1);
    let mut j = 0;
    for k in 0..=steps {
        let tk = k as f64 * dt;
        while j + 1 < knots.len() - 1 && knots[j + 1].0 <= tk {
            j += 1;
        }
        let (t0, v0) = knots[j];
        let (t1, v1) = knots[(j + 1).min(knots.len() - 1)];
        let s = if t1 > t0 {
            ((tk - t0) / (t1 - t0)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        v.push((v0 + s * (v1 - v0)) / 3.6);
    }
    DrivingCycle::new(name, dt, v, None)
}

/// Reference cycles bundled for tests and examples.
pub mod standard {
    use super::*;

    /// Elementary urban cycle of the European type-approval procedure
    /// (195 s, nominal distance 1013 m).
    pub const ECE15_KNOTS: &[(f64, f64)] = &[
        (0.0, 0.0),
        (11.0, 0.0),
        (15.0, 15.0),
        (23.0, 15.0),
        (25.0, 10.0),
        (28.0, 0.0),
        (49.0, 0.0),
        (54.0, 15.0),
        (56.0, 15.0),
        (61.0, 32.0),
        (85.0, 32.0),
        (93.0, 10.0),
        (96.0, 0.0),
        (117.0, 0.0),
        (122.0, 15.0),
        (124.0, 15.0),
        (133.0, 35.0),
        (135.0, 35.0),
        (143.0, 50.0),
        (155.0, 50.0),
        (163.0, 35.0),
        (176.0, 35.0),
        (178.0, 32.0),
        (185.0, 10.0),
        (188.0, 0.0),
        (195.0, 0.0),
    ];

    /// Extra-urban cycle of the same procedure (400 s, nominal 6955 m).
    pub const EUDC_KNOTS: &[(f64, f64)] = &[
        (0.0, 0.0),
        (20.0, 0.0),
        (25.0, 15.0),
        (27.0, 15.0),
        (36.0, 35.0),
        (38.0, 35.0),
        (46.0, 50.0),
        (48.0, 50.0),
        (61.0, 70.0),
        (111.0, 70.0),
        (119.0, 50.0),
        (188.0, 50.0),
        (201.0, 70.0),
        (251.0, 70.0),
        (286.0, 100.0),
        (316.0, 100.0),
        (336.0, 120.0),
        (346.0, 120.0),
        (362.0, 80.0),
        (370.0, 50.0),
        (380.0, 0.0),
        (400.0, 0.0),
    ];

    pub const ECE15_DISTANCE_M: f64 = 1013.0;
    pub const EUDC_DISTANCE_M: f64 = 6955.0;

    pub fn ece15() -> DrivingCycle {
        from_knots_kmh("ECE-15", ECE15_KNOTS, 1.0).expect("bundled trace is valid")
    }

    pub fn eudc() -> DrivingCycle {
        from_knots_kmh("EUDC", EUDC_KNOTS, 1.0).expect("bundled trace is valid")
    }

    /// Repeated sprints from standstill to `v_high` km/h and hard stops.
    #[derive(Clone, Copy, Debug)]
    pub struct SprintBrake {
        pub repeats: usize,
        pub v_high_kmh: f64,
        /// Launch acceleration, m/s².
        pub accel: f64,
        /// Braking deceleration magnitude, m/s².
        pub decel: f64,
        pub cruise_s: f64,
        pub idle_s: f64,
    }

    impl Default for SprintBrake {
        fn default() -> Self {
            Self {
                repeats: 4,
                v_high_kmh: 110.0,
                accel: 4.0,
                decel: 6.0,
                cruise_s: 3.0,
                idle_s: 2.0,
            }
        }
    }

    impl SprintBrake {
        pub fn knots(&self) -> Vec<(f64, f64)> {
            let vh = self.v_high_kmh / 3.6;
            let mut knots = alloc::vec![(0.0, 0.0)];
            let mut t = 0.0;
            for _ in 0..self.repeats {
                t += self.idle_s;
                knots.push((t, 0.0));
                t += vh / self.accel;
                knots.push((t, self.v_high_kmh));
                t += self.cruise_s;
                knots.push((t, self.v_high_kmh));
                t += vh / self.decel;
                knots.push((t, 0.0));
            }
            t += self.idle_s;
            knots.push((t, 0.0));
            knots
        }

        pub fn build(&self, dt: f64) -> DrivingCycle {
            from_knots_kmh("sprint-brake", &self.knots(), dt).expect("sprint parameters are valid")
        }
    }

    /// Brake-heavy synthetic cycle of about two minutes.
    pub fn sprint_brake() -> DrivingCycle {
        SprintBrake::default().build(1.0)
    }

    pub fn constant_speed(v: f64, duration_s: f64, dt: f64) -> DrivingCycle {
        let n = libm::floor(duration_s / dt + 1e-9) as usize;
        DrivingCycle::new("constant", dt, alloc::vec![v; n], None).expect("positive speed")
    }
}

#[cfg(test)]
mod tests {
    use super::standard::*;
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn constant_speed_length_and_acceleration() {
        let c = DrivingCycle::new("c", 1.0, vec![20.0; 10], None).unwrap();
        assert_eq!(c.length_m, 200.0);
        assert!(c.a.iter().all(|&a| a == 0.0));
        assert!(c.theta.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(DrivingCycle::new("c", 1.0, vec![1.0], None), Err(Error::TooShort(1)));
        assert!(matches!(
            DrivingCycle::new("c", 1.0, vec![1.0, -1.0, 2.0], None),
            Err(Error::NegativeSpeed { index: 1, .. })
        ));
        assert!(matches!(
            DrivingCycle::from_samples("c", vec![0.0, 1.0, 2.5], vec![1.0; 3], None, None),
            Err(Error::NonUniformGrid { index: 2 })
        ));
        assert!(matches!(
            DrivingCycle::from_samples(
                "c",
                vec![0.0, 1.0, 2.0],
                vec![0.0, 1.0, 2.0],
                Some(vec![1.0, 1.5, 0.0]),
                None
            ),
            Err(Error::InconsistentAcceleration { index: 1, .. })
        ));
        assert_eq!(DrivingCycle::new("c", 1.0, vec![0.0; 4], None), Err(Error::ZeroLength));
    }

    #[test]
    fn accepts_consistent_acceleration() {
        let c = DrivingCycle::from_samples(
            "c",
            vec![0.0, 1.0, 2.0],
            vec![0.0, 1.0, 2.0],
            Some(vec![1.005, 0.995, 0.3]),
            None,
        )
        .unwrap();
        assert_eq!(c.a, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_resample() {
        let c = ece15();
        let r = c.resample(1.0).unwrap();
        assert_eq!(r.v, c.v);
        assert_eq!(r.a, c.a);
    }

    #[test]
    fn ramp_resample_is_exact() {
        let v: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let c = DrivingCycle::new("ramp", 1.0, v, None).unwrap();
        let r = c.resample(0.5).unwrap();
        assert_eq!(r.len(), 21);
        for (k, &x) in r.v.iter().enumerate() {
            assert_eq!(x, 0.5 * k as f64);
        }
    }

    #[test]
    fn sine_resample_error_within_linear_bound() {
        let amp = 5.0;
        let w = 0.2;
        let v: Vec<f64> = (0..=60).map(|k| 10.0 + amp * libm::sin(w * k as f64)).collect();
        let c = DrivingCycle::new("sine", 1.0, v, None).unwrap();
        let r = c.resample(0.1).unwrap();
        // linear interpolation error bound h²/8 · max|v''|
        let bound = 1.0 / 8.0 * amp * w * w;
        for (tk, vk) in r.t.iter().zip(r.v.iter()) {
            let exact = 10.0 + amp * libm::sin(w * tk);
            assert!((vk - exact).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_step() {
        let c = DrivingCycle::new("c", 1.0, vec![1.0; 5], None).unwrap();
        assert!(matches!(c.resample(5.0), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn regulatory_trace_distances() {
        let e = ece15();
        assert_eq!(e.len(), 196);
        let rel = (e.length_m - ECE15_DISTANCE_M).abs() / ECE15_DISTANCE_M;
        assert!(rel < 0.01, "{}", e.length_m);
        let u = eudc();
        assert_eq!(u.len(), 401);
        let rel = (u.length_m - EUDC_DISTANCE_M).abs() / EUDC_DISTANCE_M;
        assert!(rel < 0.01, "{}", u.length_m);
    }

    #[test]
    fn trapezoid_distance_oracle() {
        // closed-form area under the knots
        let area: f64 = ECE15_KNOTS
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0 / 3.6)
            .sum();
        assert!((ece15().length_m - area).abs() < 1e-9);
    }

    #[test]
    fn percent_grade() {
        assert!((percent_to_rad(25.0) - libm::atan(0.25)).abs() < 1e-15);
        assert_eq!(percent_to_rad(0.0), 0.0);
    }

    #[test]
    fn sprint_cycle_has_hard_braking() {
        let c = sprint_brake();
        assert!(c.has_braking());
        let min_a = c.a.iter().copied().fold(0.0, f64::min);
        assert!(min_a <= -5.0);
    }

    proptest! {
        #[test]
        fn round_trip_on_piecewise_linear(speeds in proptest::collection::vec(0.0f64..40.0, 3..30), h in prop::sample::select(vec![0.5, 0.25, 0.2, 0.1])) {
            let c = DrivingCycle::new("p", 1.0, speeds, None);
            prop_assume!(c.is_ok());
            let c = c.unwrap();
            let back = c.resample(h).unwrap().resample(1.0).unwrap();
            prop_assert_eq!(back.len(), c.len());
            for (x, y) in back.v.iter().zip(c.v.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn distance_stable_under_refinement(speeds in proptest::collection::vec(1.0f64..40.0, 3..30), h in prop::sample::select(vec![1.0, 0.5, 0.25, 0.1])) {
            let mut speeds = speeds;
            // standstill at both ends makes rectangle sums equal trapezoids
            speeds.insert(0, 0.0);
            speeds.push(0.0);
            let c = DrivingCycle::new("p", 1.0, speeds, None).unwrap();
            let r = c.resample(h).unwrap();
            prop_assert!((r.length_m - c.length_m).abs() <= 0.005 * c.length_m);
        }
    }
}
