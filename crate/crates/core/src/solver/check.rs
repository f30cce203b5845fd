//! Finite-difference verification of [`NlpProblem`] Jacobians.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NlpProblem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeError {
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    /// `|analytic − fd| / max(1, |fd|)`.
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeReport {
    /// Drawn columns, in order.
    pub columns: Vec<usize>,
    pub checked_entries: usize,
    pub worst: Option<DerivativeError>,
}

impl DerivativeReport {
    pub fn max_rel_error(&self) -> f64 {
        self.worst.map_or(0.0, |w| w.rel_error)
    }
}

/// Compares the analytic Jacobian at `x` with central differences along
/// `samples` randomly drawn variables that are not fixed by their bounds.
/// Every row of each drawn column is compared, including structural zeros.
pub fn check_jacobian(problem: &dyn NlpProblem, x: &[f64], samples: usize, seed: u64) -> DerivativeReport {
    let n = problem.num_variables();
    let m = problem.num_constraints();
    let (mut lo, mut hi) = (alloc::vec![0.0; n], alloc::vec![0.0; n]);
    problem.variable_bounds(&mut lo, &mut hi);
    let free: Vec<usize> = (0..n).filter(|&i| lo[i] < hi[i]).collect();

    let structure = problem.jacobian_structure();
    let mut values = alloc::vec![0.0; structure.len()];
    problem.jacobian_values(x, &mut values);
    let mut by_col: Vec<Vec<(usize, f64)>> = alloc::vec![Vec::new(); n];
    for (&(r, c), &v) in structure.iter().zip(&values) {
        by_col[c].push((r, v));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DerivativeReport {
        columns: Vec::with_capacity(samples),
        checked_entries: 0,
        worst: None,
    };
    if free.is_empty() {
        return report;
    }
    let (mut gp, mut gm) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
    let mut xp = x.to_vec();
    for _ in 0..samples {
        let col = free[(rng.next_u64() % free.len() as u64) as usize];
        let h = 1e-6 * x[col].abs().max(1.0);
        xp[col] = x[col] + h;
        problem.constraints(&xp, &mut gp);
        xp[col] = x[col] - h;
        problem.constraints(&xp, &mut gm);
        xp[col] = x[col];

        let mut analytic = alloc::vec![0.0; m];
        for &(r, v) in &by_col[col] {
            analytic[r] += v;
        }
        for row in 0..m {
            let fd = (gp[row] - gm[row]) / (2.0 * h);
            let rel_error = (analytic[row] - fd).abs() / fd.abs().max(1.0);
            report.checked_entries += 1;
            if report.worst.is_none_or(|w| rel_error > w.rel_error) {
                report.worst = Some(DerivativeError {
                    row,
                    col,
                    analytic: analytic[row],
                    finite_difference: fd,
                    rel_error,
                });
            }
        }
        report.columns.push(col);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// `g0 = x0² x1`, `g1 = sin(x1) + x2`; `x2` fixed.
    struct Toy {
        broken: bool,
    }

    impl NlpProblem for Toy {
        fn num_variables(&self) -> usize {
            3
        }
        fn num_constraints(&self) -> usize {
            2
        }
        fn variable_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l.copy_from_slice(&[-10.0, -10.0, 1.0]);
            u.copy_from_slice(&[10.0, 10.0, 1.0]);
        }
        fn constraint_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l.fill(0.0);
            u.fill(0.0);
        }
        fn initial_point(&self, x: &mut [f64]) {
            x.fill(0.5);
        }
        fn objective(&self, _: &[f64]) -> f64 {
            0.0
        }
        fn objective_gradient(&self, _: &[f64], g: &mut [f64]) {
            g.fill(0.0);
        }
        fn constraints(&self, x: &[f64], g: &mut [f64]) {
            g[0] = x[0] * x[0] * x[1];
            g[1] = libm::sin(x[1]) + x[2];
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            vec![(0, 0), (0, 1), (1, 1), (1, 2)]
        }
        fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
            v[0] = 2.0 * x[0] * x[1];
            v[1] = x[0] * x[0];
            v[2] = libm::cos(x[1]) * if self.broken { 1.01 } else { 1.0 };
            v[3] = 1.0;
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            Vec::new()
        }
        fn hessian_values(&self, _: &[f64], _: f64, _: &[f64], _: &mut [f64]) {}
    }

    #[test]
    fn exact_jacobian_passes() {
        let r = check_jacobian(&Toy { broken: false }, &[1.3, -0.7, 1.0], 50, 7);
        assert_eq!(r.columns.len(), 50);
        assert!(r.max_rel_error() < 1e-8, "{r:?}");
    }

    #[test]
    fn injected_fault_is_located() {
        let r = check_jacobian(&Toy { broken: true }, &[1.3, -0.7, 1.0], 50, 7);
        let w = r.worst.unwrap();
        assert_eq!((w.row, w.col), (1, 1));
        assert!(w.rel_error > 1e-3);
    }

    #[test]
    fn fixed_variables_are_skipped() {
        let r = check_jacobian(&Toy { broken: false }, &[1.3, -0.7, 1.0], 200, 1);
        assert!(r.columns.iter().all(|&c| c < 2));
        assert!(r.columns.contains(&0) && r.columns.contains(&1));
        assert_eq!(r.checked_entries, 400);
    }
}
