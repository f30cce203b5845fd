//! Simultaneous sizing and energy management as one nonlinear program.
//!
//! The design scalars `(γ, S_m, S_b)` and every per-step force, power and
//! energy are decision variables. After the solve the force trajectory is
//! replayed through [`simulate::run`], which serves as an independent check
//! of the transcription.

mod layout;
mod problem;
mod rows;

use alloc::string::String;
use alloc::vec::Vec;

use crate::battery::J_PER_WH;
use crate::cycle::DrivingCycle;
use crate::error::{Error, Result};
use crate::simulate::{self, Design, ForceCommand, Policy, Powertrain, SimOptions, SimResult};
use crate::solver::{IterationRecord, NlpProblem, SolveStatus, Solver, SolverOptions, SolverOutcome};
use crate::vehicle;

pub use layout::{Field, Layout, Scalar, Slot, BLOCK, SCALARS};
pub use problem::{SplitMode, Transcription, SCALE_MAX, SCALE_MIN};
pub use rows::{RowKind, SigmaBranch};

use rows::{KN, KW, MJ};

/// Constraint rows per step.
pub const ROWS_PER_STEP: usize = 19;
/// Rows for the vehicle-level targets.
pub const GLOBAL_ROWS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Mode {
    /// Front share optimised freely up to the adherence split.
    Free,
    /// Front share fixed to the adherence split.
    Adherence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NlpOptions {
    /// Complementarity relaxation in N² and W².
    pub eps_c: f64,
    pub solver: SolverOptions,
    /// Re-solves allowed when the pinned split changes clamp branch.
    pub max_rebuilds: usize,
    /// Relative agreement required between the program and its replay.
    pub replay_tol: f64,
    /// `(mu_init, bound_push)` pairs tried in turn after a failed solve.
    pub fallbacks: Vec<(f64, f64)>,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            eps_c: 1e-3,
            solver: SolverOptions {
                mu_init: 1e-6,
                ..SolverOptions::default()
            },
            max_rebuilds: 3,
            replay_tol: 1e-6,
            fallbacks: alloc::vec![(1e-5, 1e-8), (1e-4, 1e-8), (1e-1, 1e-2)],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub mode: Mode,
    pub design: Design,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Objective in Wh plus the transfer penalty.
    pub objective: f64,
    /// Energy drawn according to the program, J.
    pub e_c_nlp: f64,
    /// Energy drawn according to the replay, J.
    pub e_c: f64,
    /// `|e_c − e_c_nlp| / e_c`.
    pub replay_rel_error: f64,
    /// Largest complementarity product, N² or W².
    pub complementarity: f64,
    pub constraint_violation: f64,
    /// Label and violation of the worst constraint row at the solution.
    pub worst_constraint: Option<(String, f64)>,
    pub rebuilds: usize,
    /// Iterations of every attempt on the final program, in order.
    pub history: Vec<IterationRecord>,
    pub trajectory: SimResult,
    /// Solution in program units.
    pub x: Vec<f64>,
    pub wall_time_s: Option<f64>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status.is_success()
    }

    pub fn wh_per_km(&self) -> f64 {
        self.trajectory.wh_per_km
    }
}

/// Program-unit starting point from a simulated trajectory.
pub fn initial_point(layout: &Layout, sim: &SimResult) -> Vec<f64> {
    let mut x = alloc::vec![0.0; layout.len()];
    let d = &sim.design;
    x[layout.scalar(Scalar::Gamma)] = d.gamma;
    x[layout.scalar(Scalar::Sm)] = d.s_m;
    x[layout.scalar(Scalar::Sb)] = d.s_b;
    for (k, s) in sim.steps.iter().enumerate() {
        let b = &s.blend;
        let mut put = |f: Field, v: f64| x[layout.field(k, f)] = v;
        put(Field::Sigma, b.sigma);
        put(Field::FmF, b.f_m_f / KN);
        put(Field::FrPos, b.f_m_r.max(0.0) / KN);
        put(Field::FrNeg, (-b.f_m_r).max(0.0) / KN);
        put(Field::FbrkF, b.f_brk_f / KN);
        put(Field::FbrkR, b.f_brk_r / KN);
        put(Field::FtrF, b.f_tr_f / KN);
        put(Field::PacPos, s.p_ac.max(0.0) / KW);
        put(Field::PacNeg, (-s.p_ac).max(0.0) / KW);
        put(Field::PbPos, s.p_b.max(0.0) / KW);
        put(Field::PbNeg, (-s.p_b).max(0.0) / KW);
        put(Field::Eb, sim.e_b[k + 1] / MJ);
    }
    x
}

fn design_of(layout: &Layout, x: &[f64]) -> Design {
    Design {
        gamma: x[layout.scalar(Scalar::Gamma)],
        s_m: x[layout.scalar(Scalar::Sm)],
        s_b: x[layout.scalar(Scalar::Sb)],
    }
}

/// Clamp branches of the adherence split for a design.
pub fn sigma_branches(pt: &Powertrain, design: &Design, cycle: &DrivingCycle) -> Result<Vec<SigmaBranch>> {
    let m = pt.mass(design)?.m_total;
    let p = &pt.vehicle;
    Ok((0..cycle.len())
        .map(|k| {
            let f_v = vehicle::demand_force(p, m, cycle.v[k], cycle.a[k], cycle.theta[k]);
            SigmaBranch::of(crate::blending::sigma_adherence_raw(p, m, f_v, cycle.theta[k]))
        })
        .collect())
}

/// Wheel forces of a solution, in newtons, with both balance equations
/// closed exactly at the solved mass.
pub fn force_trace(pt: &Powertrain, cycle: &DrivingCycle, x: &[f64]) -> Result<Vec<ForceCommand>> {
    let layout = Layout::new(cycle.len());
    let design = design_of(&layout, x);
    let m = pt.mass(&design)?.m_total;
    let p = &pt.vehicle;
    Ok((0..cycle.len())
        .map(|k| {
            let get = |f: Field| x[layout.field(k, f)];
            let f_v = vehicle::demand_force(p, m, cycle.v[k], cycle.a[k], cycle.theta[k]);
            let sigma = get(Field::Sigma).clamp(0.0, 1.0);
            let mut f_m_f = get(Field::FmF) * KN;
            let f_brk_f = get(Field::FbrkF).min(0.0) * KN;
            let f_brk_r = get(Field::FbrkR).min(0.0) * KN;
            let mut f_tr_f = sigma * f_v - f_m_f - f_brk_f;
            if f_tr_f < 0.0 {
                f_m_f += f_tr_f;
                f_tr_f = 0.0;
            }
            let f_m_r = (1.0 - sigma) * f_v + f_tr_f - f_brk_r;
            ForceCommand {
                sigma,
                f_m_f,
                f_m_r,
                f_brk_f,
                f_brk_r,
                f_tr_f,
            }
        })
        .collect())
}

fn finish(
    pt: &Powertrain,
    cycle: &DrivingCycle,
    mode: Mode,
    problem: &Transcription,
    out: SolverOutcome,
    rebuilds: usize,
) -> Result<SolveResult> {
    let layout = problem.layout();
    let design = design_of(&layout, &out.x);
    let trace = force_trace(pt, cycle, &out.x)?;
    let trajectory = simulate::run(pt, &design, cycle, Policy::ForceTrace(&trace), &SimOptions::default())?;
    let e_c_nlp = problem.consumed_energy(&out.x);
    let e_c = trajectory.e_c;
    Ok(SolveResult {
        mode,
        design,
        status: out.status,
        iterations: out.iterations,
        objective: out.objective,
        e_c_nlp,
        e_c,
        replay_rel_error: (e_c - e_c_nlp).abs() / e_c.abs().max(J_PER_WH),
        complementarity: problem.max_complementarity(&out.x),
        constraint_violation: out.constraint_violation,
        worst_constraint: worst_row(problem, &out.x),
        rebuilds,
        history: out.history,
        trajectory,
        x: out.x,
        wall_time_s: None,
    })
}

/// Most violated constraint row, in program units.
pub fn worst_row(problem: &Transcription, x: &[f64]) -> Option<(String, f64)> {
    let m = problem.num_constraints();
    let (mut lo, mut hi, mut g) = (alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m]);
    problem.constraint_bounds(&mut lo, &mut hi);
    problem.constraints(x, &mut g);
    (0..m)
        .map(|i| {
            let v = if g[i].is_finite() {
                (lo[i] - g[i]).max(g[i] - hi[i])
            } else {
                f64::INFINITY
            };
            (i, v)
        })
        .filter(|(_, v)| *v > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, v)| (problem.constraint_label(i), v))
}

fn solve_with_fallbacks(problem: &Transcription, opts: &NlpOptions, solver: &dyn Solver) -> SolverOutcome {
    let mut out = solver.solve(problem, &opts.solver);
    for &(mu_init, bound_push) in &opts.fallbacks {
        if out.status.is_success() {
            break;
        }
        log::debug!("solve ended with {:?}; retrying with mu_init = {mu_init:e}", out.status);
        let retry = solver.solve(
            problem,
            &SolverOptions {
                mu_init,
                bound_push,
                ..opts.solver.clone()
            },
        );
        let iterations = out.iterations + retry.iterations;
        let mut history = core::mem::take(&mut out.history);
        history.extend(retry.history.iter().cloned());
        out = SolverOutcome {
            iterations,
            history,
            ..retry
        };
    }
    out
}

/// Solves the program from the heuristic design, or from `warm` if given.
pub fn optimize(
    pt: &Powertrain,
    cycle: &DrivingCycle,
    mode: Mode,
    opts: &NlpOptions,
    solver: &dyn Solver,
    warm: Option<&[f64]>,
) -> Result<SolveResult> {
    let layout = Layout::new(cycle.len());
    let mut start = match warm {
        Some(x) if x.len() == layout.len() => x.to_vec(),
        Some(_) => return Err(Error::LengthMismatch("warm start and layout")),
        None => {
            let d = simulate::heuristic_design(pt, cycle)?;
            let sim = simulate::run(pt, &d, cycle, Policy::Adherence, &SimOptions::default())?;
            initial_point(&layout, &sim)
        }
    };
    match mode {
        Mode::Free => {
            let problem = Transcription::new(pt, cycle, &SplitMode::Free, opts.eps_c, start)?;
            let out = solve_with_fallbacks(&problem, opts, solver);
            finish(pt, cycle, mode, &problem, out, 0)
        }
        Mode::Adherence => {
            let mut branches = sigma_branches(pt, &design_of(&layout, &start), cycle)?;
            let mut rebuilds = 0;
            loop {
                let problem = Transcription::new(pt, cycle, &SplitMode::Pinned(branches.clone()), opts.eps_c, start)?;
                let out = solve_with_fallbacks(&problem, opts, solver);
                let next = sigma_branches(pt, &design_of(&layout, &out.x), cycle)?;
                if next == branches || rebuilds >= opts.max_rebuilds || !out.status.is_success() {
                    return finish(pt, cycle, mode, &problem, out, rebuilds);
                }
                log::debug!("adherence split changed clamp branch; rebuilding");
                branches = next;
                start = out.x;
                rebuilds += 1;
            }
        }
    }
}

/// Adherence-split solve followed by a free-split solve warm-started from it.
pub fn optimize_both(
    pt: &Powertrain,
    cycle: &DrivingCycle,
    opts: &NlpOptions,
    solver: &dyn Solver,
) -> Result<(SolveResult, SolveResult)> {
    let fixed = optimize(pt, cycle, Mode::Adherence, opts, solver, None)?;
    let free = optimize(pt, cycle, Mode::Free, opts, solver, Some(&fixed.x))?;
    Ok((fixed, free))
}

#[cfg(test)]
mod tests;
