//! Primal-dual interior-point method with a filter line search.
//!
//! Inequalities receive slack variables; slacks are eliminated from the
//! Newton system so the factorized matrix has dimension `n + m`. Inertia is
//! corrected by shifting the primal diagonal. The barrier parameter follows
//! the monotone Fiacco–McCormick rule.

use alloc::vec;
use alloc::vec::Vec;

use log::{debug, trace};

use super::kkt::Kkt;
use super::{IterationRecord, NlpProblem, SolveStatus, Solver, SolverOptions, SolverOutcome};

#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl Solver for InteriorPoint {
    fn solve(&self, problem: &dyn NlpProblem, options: &SolverOptions) -> SolverOutcome {
        Ipm::new(problem, options).run()
    }
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_D: f64 = 1e-5;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ETA_PHI: f64 = 1e-8;
const DELTA_SWITCH: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const GAMMA_ALPHA: f64 = 0.05;
const MAX_SOC: usize = 4;
const KAPPA_SOC: f64 = 0.99;
const S_MAX: f64 = 100.0;

struct Ipm<'a> {
    p: &'a dyn NlpProblem,
    opt: &'a SolverOptions,
    n: usize,
    m: usize,
    /// Slack index for inequality rows.
    slack_of: Vec<Option<usize>>,
    eq_rhs: Vec<f64>,
    nw: usize,
    wl: Vec<f64>,
    wu: Vec<f64>,
    has_l: Vec<bool>,
    has_u: Vec<bool>,
    // unscaled original bounds for reporting
    xl0: Vec<f64>,
    xu0: Vec<f64>,
    gl0: Vec<f64>,
    gu0: Vec<f64>,
    obj_scale: f64,
    row_scale: Vec<f64>,
    jac_rows: Vec<usize>,
    jac_cols: Vec<usize>,
    hess_len: usize,
    kkt: Kkt,
}

/// Quantities evaluated at one primal point.
struct Eval {
    f: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    jac: Vec<f64>,
}

enum Step {
    Accepted { alpha: f64, dw: Vec<f64>, trials: usize },
    Failed,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a dyn NlpProblem, opt: &'a SolverOptions) -> Self {
        let n = p.num_variables();
        let m = p.num_constraints();
        let mut xl0 = vec![0.0; n];
        let mut xu0 = vec![0.0; n];
        p.variable_bounds(&mut xl0, &mut xu0);
        let mut gl0 = vec![0.0; m];
        let mut gu0 = vec![0.0; m];
        p.constraint_bounds(&mut gl0, &mut gu0);

        let mut slack_of = vec![None; m];
        let mut eq_rhs = vec![0.0; m];
        let mut mi = 0;
        for i in 0..m {
            if gl0[i] == gu0[i] {
                eq_rhs[i] = gl0[i];
            } else {
                slack_of[i] = Some(mi);
                mi += 1;
            }
        }
        let jac_struct = p.jacobian_structure();
        let hess_struct = p.hessian_structure();
        let kkt = Kkt::new(n, m, &hess_struct, &jac_struct, p.elimination_keys());
        debug!(
            "ipm: n = {n}, m = {m}, slacks = {mi}, jac nnz = {}, hess nnz = {}, factor nnz = {}",
            jac_struct.len(),
            hess_struct.len(),
            kkt.factor_nnz()
        );
        Self {
            p,
            opt,
            n,
            m,
            slack_of,
            eq_rhs,
            nw: n + mi,
            wl: Vec::new(),
            wu: Vec::new(),
            has_l: Vec::new(),
            has_u: Vec::new(),
            xl0,
            xu0,
            gl0,
            gu0,
            obj_scale: 1.0,
            row_scale: vec![1.0; m],
            jac_rows: jac_struct.iter().map(|e| e.0).collect(),
            jac_cols: jac_struct.iter().map(|e| e.1).collect(),
            hess_len: hess_struct.len(),
            kkt,
        }
    }

    fn relax(&self, v: f64, down: bool) -> f64 {
        let r = self.opt.bound_relax * v.abs().max(1.0);
        if down {
            v - r
        } else {
            v + r
        }
    }

    fn setup_scaling(&mut self, x: &[f64]) {
        let mut grad = vec![0.0; self.n];
        self.p.objective_gradient(x, &mut grad);
        let gmax = grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.obj_scale = if gmax.is_finite() && gmax > self.opt.max_gradient {
            self.opt.max_gradient / gmax
        } else {
            1.0
        };
        let mut jac = vec![0.0; self.jac_rows.len()];
        self.p.jacobian_values(x, &mut jac);
        let mut rmax = vec![0.0f64; self.m];
        for (k, &v) in jac.iter().enumerate() {
            let r = self.jac_rows[k];
            rmax[r] = rmax[r].max(v.abs());
        }
        for i in 0..self.m {
            self.row_scale[i] = if rmax[i].is_finite() && rmax[i] > self.opt.max_gradient {
                self.opt.max_gradient / rmax[i]
            } else {
                1.0
            };
        }
    }

    fn setup_bounds(&mut self) {
        let nw = self.nw;
        self.wl = vec![f64::NEG_INFINITY; nw];
        self.wu = vec![f64::INFINITY; nw];
        for i in 0..self.n {
            if self.xl0[i].is_finite() {
                self.wl[i] = self.relax(self.xl0[i], true);
            }
            if self.xu0[i].is_finite() {
                self.wu[i] = self.relax(self.xu0[i], false);
            }
        }
        for i in 0..self.m {
            if let Some(s) = self.slack_of[i] {
                let d = self.row_scale[i];
                if self.gl0[i].is_finite() {
                    self.wl[self.n + s] = self.relax(d * self.gl0[i], true);
                }
                if self.gu0[i].is_finite() {
                    self.wu[self.n + s] = self.relax(d * self.gu0[i], false);
                }
            }
        }
        self.has_l = self.wl.iter().map(|v| v.is_finite()).collect();
        self.has_u = self.wu.iter().map(|v| v.is_finite()).collect();
    }

    fn push_inside(&self, i: usize, v: f64) -> f64 {
        let (l, u) = (self.wl[i], self.wu[i]);
        let k1 = self.opt.bound_push;
        let mut v = v;
        if self.has_l[i] && self.has_u[i] {
            let pl = (k1 * l.abs().max(1.0)).min(k1 * (u - l));
            let pu = (k1 * u.abs().max(1.0)).min(k1 * (u - l));
            if v < l + pl {
                v = l + pl;
            }
            if v > u - pu {
                v = u - pu;
            }
        } else if self.has_l[i] {
            let pl = k1 * l.abs().max(1.0);
            if v < l + pl {
                v = l + pl;
            }
        } else if self.has_u[i] {
            let pu = k1 * u.abs().max(1.0);
            if v > u - pu {
                v = u - pu;
            }
        }
        v
    }

    fn evaluate(&self, w: &[f64]) -> Option<Eval> {
        let x = &w[..self.n];
        let f = self.obj_scale * self.p.objective(x);
        if !f.is_finite() {
            return None;
        }
        let mut grad = vec![0.0; self.n];
        self.p.objective_gradient(x, &mut grad);
        grad.iter_mut().for_each(|g| *g *= self.obj_scale);
        let c = self.constraints(w)?;
        let mut jac = vec![0.0; self.jac_rows.len()];
        self.p.jacobian_values(x, &mut jac);
        for (k, v) in jac.iter_mut().enumerate() {
            *v *= self.row_scale[self.jac_rows[k]];
        }
        if grad.iter().chain(jac.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Eval { f, grad, c, jac })
    }

    fn constraints(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; self.m];
        self.p.constraints(&w[..self.n], &mut g);
        for i in 0..self.m {
            let d = self.row_scale[i];
            g[i] = match self.slack_of[i] {
                Some(s) => d * g[i] - w[self.n + s],
                None => d * (g[i] - self.eq_rhs[i]),
            };
            if !g[i].is_finite() {
                return None;
            }
        }
        Some(g)
    }

    fn first_nonfinite_row(&self, x: &[f64]) -> Option<usize> {
        let mut g = vec![0.0; self.m];
        self.p.constraints(x, &mut g);
        g.iter().position(|v| !v.is_finite())
    }

    fn barrier(&self, f: f64, w: &[f64], mu: f64) -> f64 {
        let mut phi = f;
        for i in 0..self.nw {
            let (hl, hu) = (self.has_l[i], self.has_u[i]);
            if hl {
                phi -= mu * libm::log(w[i] - self.wl[i]);
            }
            if hu {
                phi -= mu * libm::log(self.wu[i] - w[i]);
            }
            if hl && !hu {
                phi += KAPPA_D * mu * (w[i] - self.wl[i]);
            } else if hu && !hl {
                phi += KAPPA_D * mu * (self.wu[i] - w[i]);
            }
        }
        phi
    }

    fn barrier_gradient(&self, ev: &Eval, w: &[f64], mu: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.nw];
        g[..self.n].copy_from_slice(&ev.grad);
        for i in 0..self.nw {
            let (hl, hu) = (self.has_l[i], self.has_u[i]);
            if hl {
                g[i] -= mu / (w[i] - self.wl[i]);
            }
            if hu {
                g[i] += mu / (self.wu[i] - w[i]);
            }
            if hl && !hu {
                g[i] += KAPPA_D * mu;
            } else if hu && !hl {
                g[i] -= KAPPA_D * mu;
            }
        }
        g
    }

    /// `Jᵀλ` over the full primal vector (slacks contribute `-λ`).
    fn jt_lambda(&self, jac: &[f64], lam: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nw];
        for (k, &v) in jac.iter().enumerate() {
            out[self.jac_cols[k]] += v * lam[self.jac_rows[k]];
        }
        for i in 0..self.m {
            if let Some(s) = self.slack_of[i] {
                out[self.n + s] -= lam[i];
            }
        }
        out
    }

    fn theta(c: &[f64]) -> f64 {
        c.iter().map(|v| v.abs()).sum()
    }

    fn max_step(&self, w: &[f64], dw: &[f64], tau: f64) -> f64 {
        let mut alpha = 1.0f64;
        for i in 0..self.nw {
            if dw[i] < 0.0 && self.has_l[i] {
                alpha = alpha.min(-tau * (w[i] - self.wl[i]) / dw[i]);
            }
            if dw[i] > 0.0 && self.has_u[i] {
                alpha = alpha.min(tau * (self.wu[i] - w[i]) / dw[i]);
            }
        }
        alpha
    }

    fn max_dual_step(z: &[f64], dz: &[f64], tau: f64) -> f64 {
        let mut alpha = 1.0f64;
        for (zi, dzi) in z.iter().zip(dz.iter()) {
            if *dzi < 0.0 {
                alpha = alpha.min(-tau * zi / dzi);
            }
        }
        alpha
    }

    #[allow(clippy::too_many_arguments)]
    fn errors(&self, ev: &Eval, w: &[f64], lam: &[f64], zl: &[f64], zu: &[f64], mu: f64) -> (f64, f64, f64) {
        let jtl = self.jt_lambda(&ev.jac, lam);
        let mut dual = 0.0f64;
        for i in 0..self.nw {
            let g = if i < self.n { ev.grad[i] } else { 0.0 };
            dual = dual.max((g + jtl[i] - zl[i] + zu[i]).abs());
        }
        let primal = ev.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut compl = 0.0f64;
        for i in 0..self.nw {
            if self.has_l[i] {
                compl = compl.max(((w[i] - self.wl[i]) * zl[i] - mu).abs());
            }
            if self.has_u[i] {
                compl = compl.max(((self.wu[i] - w[i]) * zu[i] - mu).abs());
            }
        }
        let nz = (self.has_l.iter().filter(|b| **b).count() + self.has_u.iter().filter(|b| **b).count()).max(1) as f64;
        let zsum: f64 = zl.iter().chain(zu.iter()).map(|v| v.abs()).sum();
        let lsum: f64 = lam.iter().map(|v| v.abs()).sum();
        let sd = ((lsum + zsum) / (self.m as f64 + nz)).max(S_MAX) / S_MAX;
        let sc = (zsum / nz).max(S_MAX) / S_MAX;
        (dual / sd, primal, compl / sc)
    }

    fn unscaled_violation(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.m];
        self.p.constraints(x, &mut g);
        super::bound_violation(&g, &self.gl0, &self.gu0).max(super::bound_violation(x, &self.xl0, &self.xu0))
    }

    /// Builds and factorizes the reduced system with inertia correction.
    /// Returns the diagonal terms used for the slack rows and `(δ_w, δ_c)`.
    fn factorize(
        &mut self,
        hess: &[f64],
        jac: &[f64],
        sigma: &[f64],
        mu: f64,
        last_dw: &mut f64,
    ) -> Option<(Vec<f64>, f64, f64)> {
        let mut delta_w = 0.0;
        let mut delta_c = 0.0;
        let mut attempt = 0;
        loop {
            let mut row_diag = vec![0.0; self.m];
            for i in 0..self.m {
                if let Some(s) = self.slack_of[i] {
                    row_diag[i] = 1.0 / (sigma[self.n + s] + delta_w);
                }
            }
            self.kkt.assemble(hess, jac, &sigma[..self.n], &row_diag);
            let inertia = self.kkt.factorize(delta_w, delta_c);
            if self.kkt.inertia_ok(&inertia) {
                if delta_w > 0.0 {
                    *last_dw = delta_w;
                }
                return Some((row_diag, delta_w, delta_c));
            }
            trace!("inertia {inertia:?} with delta_w = {delta_w:e}");
            if inertia.regularized > 0 && delta_c == 0.0 {
                delta_c = 1e-8 * libm::pow(mu, 0.25);
            }
            attempt += 1;
            if attempt == 1 {
                delta_w = if *last_dw == 0.0 {
                    1e-4
                } else {
                    (*last_dw / 3.0).max(1e-20)
                };
            } else if *last_dw == 0.0 {
                delta_w *= 100.0;
            } else {
                delta_w *= 8.0;
            }
            if delta_w > 1e40 || attempt > 60 {
                return None;
            }
        }
    }

    fn run(mut self) -> SolverOutcome {
        let n = self.n;
        let m = self.m;
        let mut x0 = vec![0.0; n];
        self.p.initial_point(&mut x0);
        self.setup_scaling(&x0);
        self.setup_bounds();

        let mut w = vec![0.0; self.nw];
        for i in 0..n {
            w[i] = self.push_inside(i, x0[i]);
        }
        let mut history = Vec::new();
        let fail = |this: &Self, w: &[f64], status: SolveStatus, history: Vec<IterationRecord>| {
            let x = w[..this.n].to_vec();
            SolverOutcome {
                status,
                objective: this.p.objective(&x),
                constraint_violation: this.unscaled_violation(&x),
                lambda: vec![0.0; this.m],
                dual_infeasibility: f64::NAN,
                iterations: history.len(),
                history,
                x,
            }
        };
        // slack initialization from the constraint values
        {
            let mut g = vec![0.0; m];
            self.p.constraints(&w[..n], &mut g);
            if let Some(r) = g.iter().position(|v| !v.is_finite()) {
                let location = self.p.constraint_label(r);
                return fail(&self, &w, SolveStatus::EvaluationError { location }, history);
            }
            for i in 0..m {
                if let Some(s) = self.slack_of[i] {
                    w[n + s] = self.push_inside(n + s, self.row_scale[i] * g[i]);
                }
            }
        }
        let mut zl: Vec<f64> = self.has_l.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut zu: Vec<f64> = self.has_u.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut lam = vec![0.0; m];
        let mut mu = self.opt.mu_init;
        let mut ev = match self.evaluate(&w) {
            Some(e) => e,
            None => {
                let location = match self.first_nonfinite_row(&w[..n]) {
                    Some(r) => self.p.constraint_label(r),
                    None => "objective or derivatives".into(),
                };
                return fail(&self, &w, SolveStatus::EvaluationError { location }, history);
            }
        };
        let mut hess = vec![0.0; self.hess_len];

        // least-squares multiplier estimate
        {
            let mut rhs = vec![0.0; n + m];
            for i in 0..n {
                rhs[i] = -(ev.grad[i] - zl[i] + zu[i]);
            }
            let ones = vec![1.0; self.nw];
            let row_diag: Vec<f64> = (0..m)
                .map(|i| if self.slack_of[i].is_some() { 1.0 } else { 0.0 })
                .collect();
            // slack rows: (I) ds - dλ = -(−zl+zu) handled by substitution
            for i in 0..m {
                if let Some(s) = self.slack_of[i] {
                    rhs[n + i] = zl[n + s] - zu[n + s];
                }
            }
            let zero_h = vec![0.0; self.hess_len];
            self.kkt.assemble(&zero_h, &ev.jac, &ones[..n], &row_diag);
            let inertia = self.kkt.factorize(0.0, 1e-8);
            if self.kkt.inertia_ok(&inertia) {
                self.kkt.solve(&mut rhs, 0.0, 1e-8);
                let est = &rhs[n..];
                if est.iter().all(|v| v.abs() <= 1e3) {
                    lam.copy_from_slice(est);
                }
            }
        }

        let theta0 = Self::theta(&ev.c);
        let theta_max = 1e4 * theta0.max(1.0);
        let theta_min = 1e-4 * theta0.max(1.0);
        let mut filter: Vec<(f64, f64)> = Vec::new();
        let mut last_dw = 0.0;
        let mut acceptable_count = 0usize;
        let mut consecutive_failures = 0usize;
        let mut status = SolveStatus::MaxIterations;
        let mut iter = 0usize;

        loop {
            // convergence tests
            let (du0, pr0, co0) = self.errors(&ev, &w, &lam, &zl, &zu, 0.0);
            let e0 = du0.max(pr0).max(co0);
            let viol = self.unscaled_violation(&w[..n]);
            let record = IterationRecord {
                iter,
                objective: ev.f / self.obj_scale,
                inf_pr: pr0,
                inf_du: du0,
                mu,
                reg: last_dw,
                alpha_du: 0.0,
                alpha_pr: 0.0,
                ls_trials: 0,
            };
            if e0 <= self.opt.tol && viol <= self.opt.constr_viol_tol && pr0 <= self.opt.constr_viol_tol {
                status = SolveStatus::Optimal;
                history.push(record);
                break;
            }
            if e0 <= self.opt.acceptable_tol && viol <= 1e2 * self.opt.constr_viol_tol {
                acceptable_count += 1;
                if acceptable_count >= self.opt.acceptable_iter {
                    status = SolveStatus::Acceptable;
                    history.push(record);
                    break;
                }
            } else {
                acceptable_count = 0;
            }
            if iter >= self.opt.max_iter {
                history.push(record);
                break;
            }

            // barrier update
            loop {
                let (du, pr, co) = self.errors(&ev, &w, &lam, &zl, &zu, mu);
                let emu = du.max(pr).max(co);
                let mu_min = self.opt.tol / 10.0;
                if emu <= KAPPA_EPS * mu && mu > mu_min {
                    mu = mu_min.max((KAPPA_MU * mu).min(libm::pow(mu, THETA_MU)));
                    filter.clear();
                } else {
                    break;
                }
            }
            let tau = TAU_MIN.max(1.0 - mu);

            // Newton system
            self.p
                .hessian_values(&w[..n], self.obj_scale, &self.scaled_lambda(&lam), &mut hess);
            if hess.iter().any(|v| !v.is_finite()) {
                let location = "Hessian of the Lagrangian".into();
                status = SolveStatus::EvaluationError { location };
                history.push(record);
                break;
            }
            let mut sigma = vec![0.0; self.nw];
            for i in 0..self.nw {
                if self.has_l[i] {
                    sigma[i] += zl[i] / (w[i] - self.wl[i]);
                }
                if self.has_u[i] {
                    sigma[i] += zu[i] / (self.wu[i] - w[i]);
                }
            }
            let (row_diag, delta_w, delta_c) = match self.factorize(&hess, &ev.jac, &sigma, mu, &mut last_dw) {
                Some(v) => v,
                None => {
                    status = SolveStatus::FactorizationFailure;
                    history.push(record);
                    break;
                }
            };
            let gphi = self.barrier_gradient(&ev, &w, mu);
            let jtl = self.jt_lambda(&ev.jac, &lam);
            let r: Vec<f64> = (0..self.nw).map(|i| gphi[i] + jtl[i]).collect();
            let (dw, dlam) = self.direction(&r, &ev.c, &sigma, &row_diag, delta_w, delta_c);

            // dual direction
            let mut dzl = vec![0.0; self.nw];
            let mut dzu = vec![0.0; self.nw];
            for i in 0..self.nw {
                if self.has_l[i] {
                    let s = w[i] - self.wl[i];
                    dzl[i] = mu / s - zl[i] - zl[i] / s * dw[i];
                }
                if self.has_u[i] {
                    let s = self.wu[i] - w[i];
                    dzu[i] = mu / s - zu[i] + zu[i] / s * dw[i];
                }
            }
            let alpha_max = self.max_step(&w, &dw, tau);
            let alpha_z = Self::max_dual_step(&zl, &dzl, tau).min(Self::max_dual_step(&zu, &dzu, tau));

            let phi = self.barrier(ev.f, &w, mu);
            let theta = Self::theta(&ev.c);
            let gphi_d: f64 = gphi.iter().zip(dw.iter()).map(|(a, b)| a * b).sum();

            let step = self.line_search(
                &w,
                &dw,
                &r,
                &ev.c,
                &sigma,
                &row_diag,
                delta_w,
                delta_c,
                alpha_max,
                tau,
                mu,
                phi,
                theta,
                gphi_d,
                theta_min,
                theta_max,
                &mut filter,
            );
            let (alpha, dw_used, trials) = match step {
                Step::Accepted { alpha, dw, trials } => {
                    consecutive_failures = 0;
                    (alpha, dw, trials)
                }
                Step::Failed => {
                    consecutive_failures += 1;
                    if consecutive_failures > 8 {
                        status = SolveStatus::LineSearchFailure;
                        history.push(record);
                        break;
                    }
                    // feasibility-oriented recovery, then a forced short step
                    match self.recovery_step(&w, &ev.c, &sigma, &row_diag, delta_w, delta_c, tau) {
                        Some((a, d)) => {
                            filter.push((theta, phi));
                            (a, d, 0)
                        }
                        None => {
                            filter.clear();
                            let a = alpha_max * libm::pow(0.5, 6.0);
                            (a, dw.clone(), 0)
                        }
                    }
                }
            };

            for i in 0..self.nw {
                w[i] += alpha * dw_used[i];
            }
            for i in 0..m {
                lam[i] += alpha * dlam[i];
            }
            for i in 0..self.nw {
                if self.has_l[i] {
                    zl[i] += alpha_z * dzl[i];
                }
                if self.has_u[i] {
                    zu[i] += alpha_z * dzu[i];
                }
            }
            // keep the primal-dual pairs close to the central path
            for i in 0..self.nw {
                if self.has_l[i] {
                    let s = w[i] - self.wl[i];
                    zl[i] = zl[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
                }
                if self.has_u[i] {
                    let s = self.wu[i] - w[i];
                    zu[i] = zu[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
                }
            }
            ev = match self.evaluate(&w) {
                Some(e) => e,
                None => {
                    let location = match self.first_nonfinite_row(&w[..n]) {
                        Some(r) => self.p.constraint_label(r),
                        None => "objective or derivatives".into(),
                    };
                    status = SolveStatus::EvaluationError { location };
                    history.push(record);
                    break;
                }
            };
            history.push(IterationRecord {
                alpha_pr: alpha,
                alpha_du: alpha_z,
                ls_trials: trials,
                reg: delta_w,
                ..record
            });
            trace!(
                "iter {iter:4} f {:+.8e} pr {:.2e} du {:.2e} mu {:.1e} a {:.2e} reg {:.1e}",
                ev.f / self.obj_scale,
                pr0,
                du0,
                mu,
                alpha,
                delta_w
            );
            iter += 1;
        }

        let x = w[..n].to_vec();
        let lambda: Vec<f64> = (0..m).map(|i| lam[i] * self.row_scale[i] / self.obj_scale).collect();
        let (du, _, _) = self.errors(&ev, &w, &lam, &zl, &zu, 0.0);
        debug!("ipm finished: {status:?} after {iter} iterations");
        SolverOutcome {
            status,
            objective: self.p.objective(&x),
            constraint_violation: self.unscaled_violation(&x),
            lambda,
            dual_infeasibility: du / self.obj_scale,
            iterations: iter,
            history,
            x,
        }
    }

    fn scaled_lambda(&self, lam: &[f64]) -> Vec<f64> {
        lam.iter().zip(self.row_scale.iter()).map(|(l, d)| l * d).collect()
    }

    /// Solves for the primal step given the gradient residual `r` (full
    /// primal vector) and the constraint right-hand side `c`.
    fn direction(
        &mut self,
        r: &[f64],
        c: &[f64],
        sigma: &[f64],
        row_diag: &[f64],
        delta_w: f64,
        delta_c: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let m = self.m;
        let mut rhs = vec![0.0; n + m];
        for i in 0..n {
            rhs[i] = -r[i];
        }
        for i in 0..m {
            rhs[n + i] = -c[i];
            if let Some(s) = self.slack_of[i] {
                rhs[n + i] -= r[n + s] * row_diag[i];
            }
        }
        // dual diagonal includes the slack elimination term on top of δ_c
        self.kkt.solve(&mut rhs, delta_w, delta_c);
        let mut dw = vec![0.0; self.nw];
        dw[..n].copy_from_slice(&rhs[..n]);
        let dlam = rhs[n..].to_vec();
        for i in 0..m {
            if let Some(s) = self.slack_of[i] {
                dw[n + s] = (dlam[i] - r[n + s]) / (sigma[n + s] + delta_w);
            }
        }
        (dw, dlam)
    }

    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &mut self,
        w: &[f64],
        dw: &[f64],
        r: &[f64],
        c: &[f64],
        sigma: &[f64],
        row_diag: &[f64],
        delta_w: f64,
        delta_c: f64,
        alpha_max: f64,
        tau: f64,
        mu: f64,
        phi: f64,
        theta: f64,
        gphi_d: f64,
        theta_min: f64,
        theta_max: f64,
        filter: &mut Vec<(f64, f64)>,
    ) -> Step {
        // negligible step: accept without testing
        let tiny = (0..self.nw).all(|i| dw[i].abs() <= 10.0 * f64::EPSILON * (1.0 + w[i].abs()));
        if tiny {
            return Step::Accepted {
                alpha: alpha_max,
                dw: dw.to_vec(),
                trials: 0,
            };
        }
        let alpha_min = if gphi_d < 0.0 {
            let base = GAMMA_THETA.min(GAMMA_PHI * theta / -gphi_d);
            if theta <= theta_min {
                GAMMA_ALPHA * base.min(DELTA_SWITCH * libm::pow(theta, S_THETA) / libm::pow(-gphi_d, S_PHI))
            } else {
                GAMMA_ALPHA * base
            }
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        };
        let mut alpha = alpha_max;
        let mut trials = 0usize;
        let trial_point =
            |w: &[f64], d: &[f64], a: f64| -> Vec<f64> { w.iter().zip(d.iter()).map(|(x, dx)| x + a * dx).collect() };
        loop {
            trials += 1;
            let wt = trial_point(w, dw, alpha);
            let accepted = self.acceptable(&wt, alpha, mu, phi, theta, gphi_d, theta_min, theta_max, filter);
            if accepted == Some(true) {
                return Step::Accepted {
                    alpha,
                    dw: dw.to_vec(),
                    trials,
                };
            }
            // second-order correction on the first trial
            if trials == 1 {
                if let Some(ct) = self.constraints(&wt) {
                    let theta_t = Self::theta(&ct);
                    if theta_t >= theta {
                        let mut csoc: Vec<f64> = c.iter().zip(ct.iter()).map(|(a, b)| alpha * a + b).collect();
                        let mut theta_old = theta;
                        let mut theta_trial = theta_t;
                        for _ in 0..MAX_SOC {
                            if theta_trial > KAPPA_SOC * theta_old && theta_old != theta {
                                break;
                            }
                            let (dsoc, _) = self.direction(r, &csoc, sigma, row_diag, delta_w, delta_c);
                            let asoc = self.max_step(w, &dsoc, tau);
                            let ws = trial_point(w, &dsoc, asoc);
                            if let Some(true) =
                                self.acceptable(&ws, alpha, mu, phi, theta, gphi_d, theta_min, theta_max, filter)
                            {
                                return Step::Accepted {
                                    alpha: asoc,
                                    dw: dsoc,
                                    trials,
                                };
                            }
                            let Some(cs) = self.constraints(&ws) else { break };
                            theta_old = theta_trial;
                            theta_trial = Self::theta(&cs);
                            for (a, b) in csoc.iter_mut().zip(cs.iter()) {
                                *a = asoc * *a + b;
                            }
                        }
                    }
                }
            }
            alpha *= 0.5;
            if alpha < alpha_min * alpha_max.min(1.0) || trials > 60 {
                return Step::Failed;
            }
        }
    }

    /// Filter acceptance test. Augments the filter on h-type acceptance.
    #[allow(clippy::too_many_arguments)]
    fn acceptable(
        &self,
        wt: &[f64],
        alpha: f64,
        mu: f64,
        phi: f64,
        theta: f64,
        gphi_d: f64,
        theta_min: f64,
        theta_max: f64,
        filter: &mut Vec<(f64, f64)>,
    ) -> Option<bool> {
        let ev = self.evaluate_light(wt)?;
        let (ft, ct) = ev;
        let theta_t = Self::theta(&ct);
        let phi_t = self.barrier(ft, wt, mu);
        if !phi_t.is_finite() || theta_t > theta_max {
            return Some(false);
        }
        if filter.iter().any(|&(tf, pf)| theta_t >= tf && phi_t >= pf) {
            return Some(false);
        }
        let switching = gphi_d < 0.0 && alpha * libm::pow(-gphi_d, S_PHI) > DELTA_SWITCH * libm::pow(theta, S_THETA);
        if theta <= theta_min && switching {
            return Some(phi_t <= phi + ETA_PHI * alpha * gphi_d);
        }
        if theta_t <= (1.0 - GAMMA_THETA) * theta || phi_t <= phi - GAMMA_PHI * theta {
            filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
            return Some(true);
        }
        Some(false)
    }

    fn evaluate_light(&self, w: &[f64]) -> Option<(f64, Vec<f64>)> {
        let f = self.obj_scale * self.p.objective(&w[..self.n]);
        if !f.is_finite() {
            return None;
        }
        Some((f, self.constraints(w)?))
    }

    /// Minimum-norm step toward the linearized feasible set, backtracked on
    /// the constraint violation alone.
    #[allow(clippy::too_many_arguments)]
    fn recovery_step(
        &mut self,
        w: &[f64],
        c: &[f64],
        sigma: &[f64],
        row_diag: &[f64],
        delta_w: f64,
        delta_c: f64,
        tau: f64,
    ) -> Option<(f64, Vec<f64>)> {
        let theta = Self::theta(c);
        if theta == 0.0 {
            return None;
        }
        let zero = vec![0.0; self.nw];
        let (d, _) = self.direction(&zero, c, sigma, row_diag, delta_w, delta_c);
        let mut alpha = self.max_step(w, &d, tau);
        for _ in 0..30 {
            let wt: Vec<f64> = w.iter().zip(d.iter()).map(|(x, dx)| x + alpha * dx).collect();
            if let Some(ct) = self.constraints(&wt) {
                if Self::theta(&ct) <= (1.0 - 1e-4 * alpha) * theta {
                    return Some((alpha, d));
                }
            }
            alpha *= 0.5;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::NlpProblem;
    use alloc::vec::Vec;

    /// Hock–Schittkowski problem 71.
    struct Hs071;

    impl NlpProblem for Hs071 {
        fn num_variables(&self) -> usize {
            4
        }
        fn num_constraints(&self) -> usize {
            2
        }
        fn variable_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l.fill(1.0);
            u.fill(5.0);
        }
        fn constraint_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l[0] = 25.0;
            u[0] = f64::INFINITY;
            l[1] = 40.0;
            u[1] = 40.0;
        }
        fn initial_point(&self, x: &mut [f64]) {
            x.copy_from_slice(&[1.0, 5.0, 5.0, 1.0]);
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] * x[3] * (x[0] + x[1] + x[2]) + x[2]
        }
        fn objective_gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = x[3] * (2.0 * x[0] + x[1] + x[2]);
            g[1] = x[0] * x[3];
            g[2] = x[0] * x[3] + 1.0;
            g[3] = x[0] * (x[0] + x[1] + x[2]);
        }
        fn constraints(&self, x: &[f64], g: &mut [f64]) {
            g[0] = x[0] * x[1] * x[2] * x[3];
            g[1] = x.iter().map(|v| v * v).sum();
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            (0..2).flat_map(|r| (0..4).map(move |c| (r, c))).collect()
        }
        fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
            v[0] = x[1] * x[2] * x[3];
            v[1] = x[0] * x[2] * x[3];
            v[2] = x[0] * x[1] * x[3];
            v[3] = x[0] * x[1] * x[2];
            for i in 0..4 {
                v[4 + i] = 2.0 * x[i];
            }
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            (0..4).flat_map(|r| (0..=r).map(move |c| (r, c))).collect()
        }
        fn hessian_values(&self, x: &[f64], s: f64, l: &[f64], v: &mut [f64]) {
            // order: (0,0) (1,0) (1,1) (2,0) (2,1) (2,2) (3,0) (3,1) (3,2) (3,3)
            v[0] = s * 2.0 * x[3] + 2.0 * l[1];
            v[1] = s * x[3] + l[0] * x[2] * x[3];
            v[2] = 2.0 * l[1];
            v[3] = s * x[3] + l[0] * x[1] * x[3];
            v[4] = l[0] * x[0] * x[3];
            v[5] = 2.0 * l[1];
            v[6] = s * (2.0 * x[0] + x[1] + x[2]) + l[0] * x[1] * x[2];
            v[7] = s * x[0] + l[0] * x[0] * x[2];
            v[8] = s * x[0] + l[0] * x[0] * x[1];
            v[9] = 2.0 * l[1];
        }
    }

    #[test]
    fn solves_hs071() {
        let out = InteriorPoint.solve(&Hs071, &SolverOptions::default());
        assert!(out.status.is_success(), "{:?}", out.status);
        let expect = [1.0, 4.742_999_64, 3.821_149_98, 1.379_408_29];
        for (a, b) in out.x.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.x);
        }
        assert!((out.objective - 17.014_017_29).abs() < 1e-6);
    }

    /// Nonconvex problem with a degenerate complementarity-type constraint:
    /// min (x-1)² + (y-1)²  s.t.  x·y <= 0, x, y >= 0.
    struct Complementarity;

    impl NlpProblem for Complementarity {
        fn num_variables(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn variable_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l.fill(0.0);
            u.fill(f64::INFINITY);
        }
        fn constraint_bounds(&self, l: &mut [f64], u: &mut [f64]) {
            l[0] = f64::NEG_INFINITY;
            u[0] = 0.0;
        }
        fn initial_point(&self, x: &mut [f64]) {
            x[0] = 2.0;
            x[1] = 0.5;
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)
        }
        fn objective_gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = 2.0 * (x[0] - 1.0);
            g[1] = 2.0 * (x[1] - 1.0);
        }
        fn constraints(&self, x: &[f64], g: &mut [f64]) {
            g[0] = x[0] * x[1];
        }
        fn jacobian_structure(&self) -> Vec<(usize, usize)> {
            alloc::vec![(0, 0), (0, 1)]
        }
        fn jacobian_values(&self, x: &[f64], v: &mut [f64]) {
            v[0] = x[1];
            v[1] = x[0];
        }
        fn hessian_structure(&self) -> Vec<(usize, usize)> {
            alloc::vec![(0, 0), (1, 0), (1, 1)]
        }
        fn hessian_values(&self, _x: &[f64], s: f64, l: &[f64], v: &mut [f64]) {
            v[0] = 2.0 * s;
            v[1] = l[0];
            v[2] = 2.0 * s;
        }
    }

    #[test]
    fn handles_degenerate_product_constraint() {
        let out = InteriorPoint.solve(&Complementarity, &SolverOptions::default());
        assert!(out.status.is_success(), "{:?}", out.status);
        assert!((out.objective - 1.0).abs() < 1e-5, "{:?}", out.x);
        assert!(out.x[0] * out.x[1] < 1e-6);
    }
}
