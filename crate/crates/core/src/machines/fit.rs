//! Identification of loss coefficients from a measured map by non-negative
//! least squares.
//!
//! At reference scale the model is linear in the coefficients over the basis
//! `[ω, 1, ω², ω³, T², ω²T²]`. Iron loss and the linear mechanical term share
//! the `ω` column, so only their sum is identifiable; it is reported as the
//! iron coefficient with `b_mech = 0`. Predictions at any scale depend on the
//! sum only, since both terms scale linearly with `S_m`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{LossCoefficients, LossMapSample};
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 7;
const BASIS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub r_squared: f64,
    /// Root-mean-square error over the range of the measured losses.
    pub nrmse: f64,
    pub samples: usize,
}

fn basis(omega: f64, torque: f64) -> [f64; BASIS] {
    let w2 = omega * omega;
    let t2 = torque * torque;
    [omega, 1.0, w2, w2 * omega, t2, w2 * t2]
}

fn coefficients(x: &[f64]) -> LossCoefficients {
    LossCoefficients {
        a_fe: x[0],
        a_mech: x[1],
        b_mech: 0.0,
        c_mech: x[2],
        d_mech: x[3],
        a_cu: x[4],
        b_cu: x[5],
    }
}

/// Fits the loss family to `samples` taken at reference scale.
pub fn fit_loss_map(samples: &[LossMapSample]) -> Result<(LossCoefficients, FitReport)> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Identifiability("all coefficients (fewer than 7 samples)"));
    }
    for s in samples {
        if !(s.omega >= 0.0) || !s.torque.is_finite() || !s.p_loss.is_finite() {
            return Err(Error::Domain {
                what: "loss map sample",
                value: s.omega,
            });
        }
    }
    check_excitation(samples)?;

    let m = samples.len();
    let mut a = DMatrix::<f64>::zeros(m, BASIS);
    let b = DVector::from_iterator(m, samples.iter().map(|s| s.p_loss));
    for (i, s) in samples.iter().enumerate() {
        for (j, v) in basis(s.omega, s.torque).iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    // column equilibration keeps the subproblems well conditioned
    let norms: Vec<f64> = (0..BASIS).map(|j| a.column(j).norm()).collect();
    for j in 0..BASIS {
        let n = norms[j];
        a.column_mut(j).scale_mut(1.0 / n);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if sv.min() <= 1e-12 * smax {
        return Err(Error::Identifiability("loss family (design matrix is rank deficient)"));
    }
    let y = nnls(&a, &b);
    let x: Vec<f64> = y.iter().zip(norms.iter()).map(|(c, n)| c / n).collect();
    let coeffs = coefficients(&x);

    let mean = b.mean();
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in samples {
        let r = s.p_loss - predict(&coeffs, s.omega, s.torque);
        ss_res += r * r;
        ss_tot += (s.p_loss - mean) * (s.p_loss - mean);
        lo = lo.min(s.p_loss);
        hi = hi.max(s.p_loss);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let rmse = libm::sqrt(ss_res / m as f64);
    let nrmse = if hi > lo { rmse / (hi - lo) } else { 0.0 };
    Ok((
        coeffs,
        FitReport {
            r_squared,
            nrmse,
            samples: m,
        },
    ))
}

/// Total reference-scale loss predicted by `c`.
pub fn predict(c: &LossCoefficients, omega: f64, torque: f64) -> f64 {
    c.iron(1.0, omega) + c.mech(1.0, omega) + c.copper(1.0, omega, torque)
}

fn check_excitation(samples: &[LossMapSample]) -> Result<()> {
    let scale_t = samples.iter().map(|s| s.torque.abs()).fold(0.0, f64::max);
    if scale_t == 0.0 {
        return Err(Error::Identifiability("copper coefficients (no torque excitation)"));
    }
    let mut speeds: Vec<f64> = samples.iter().map(|s| s.omega).collect();
    speeds.sort_by(|a, b| a.partial_cmp(b).expect("finite speeds"));
    speeds.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    if speeds.len() < 4 {
        return Err(Error::Identifiability(
            "speed polynomial (fewer than four distinct speeds)",
        ));
    }
    let mut loaded: Vec<f64> = samples
        .iter()
        .filter(|s| s.torque.abs() > 1e-9 * scale_t)
        .map(|s| s.omega)
        .collect();
    loaded.sort_by(|a, b| a.partial_cmp(b).expect("finite speeds"));
    loaded.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    if loaded.len() < 2 {
        return Err(Error::Identifiability(
            "speed-dependent copper coefficient (torque applied at a single speed)",
        ));
    }
    Ok(())
}

/// Lawson–Hanson active-set solver for `min ‖Ax − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm() * b.norm().max(1.0);
    for _outer in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).expect("finite gradient"));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        for _inner in 0..(3 * n + 10) {
            let s = solve_passive(a, b, &passive);
            if (0..n).all(|j| !passive[j] || s[j] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..n {
                if passive[j] && s[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - s[j]));
                }
            }
            x += (&s - &x) * alpha;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = a.select_columns(cols.iter());
    let z = sub
        .svd(true, true)
        .solve(b, 1e-14)
        .expect("SVD computed with both factors");
    let mut s = DVector::zeros(passive.len());
    for (k, &j) in cols.iter().enumerate() {
        s[j] = z[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{synthetic_map, RearMotorModel};

    #[test]
    fn nnls_clips_negative_solution() {
        // unconstrained optimum (1, -1) → constrained (0.5, 0)
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let x = nnls(&a, &b);
        assert!(x.iter().all(|v| *v >= 0.0));
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.0);
    }

    #[test]
    fn exact_map_recovered() {
        let m = RearMotorModel::synthetic_reference();
        let samples = synthetic_map(&m.loss, m.t_max, m.p_max, m.omega_max, 13, 9);
        let (c, rep) = fit_loss_map(&samples).unwrap();
        assert!(rep.r_squared >= 0.9999);
        for (got, want) in [
            (c.a_fe, m.loss.a_fe + m.loss.b_mech),
            (c.a_mech, m.loss.a_mech),
            (c.c_mech, m.loss.c_mech),
            (c.d_mech, m.loss.d_mech),
            (c.a_cu, m.loss.a_cu),
            (c.b_cu, m.loss.b_cu),
        ] {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn zero_torque_map_is_unidentifiable() {
        let m = RearMotorModel::synthetic_reference();
        let samples: Vec<_> = synthetic_map(&m.loss, m.t_max, m.p_max, m.omega_max, 13, 9)
            .into_iter()
            .map(|s| LossMapSample { torque: 0.0, ..s })
            .collect();
        assert_eq!(
            fit_loss_map(&samples).unwrap_err(),
            Error::Identifiability("copper coefficients (no torque excitation)")
        );
    }

    #[test]
    fn too_few_samples() {
        let m = RearMotorModel::synthetic_reference();
        let samples = synthetic_map(&m.loss, m.t_max, m.p_max, m.omega_max, 3, 2);
        assert!(matches!(fit_loss_map(&samples), Err(Error::Identifiability(_))));
    }
}
