use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use superbike_core::cycle::DrivingCycle;
use superbike_core::machines::{self, fit, LossMapSample};
use superbike_core::nlp::{self, Mode, NlpOptions, SolveResult};
use superbike_core::simulate::{self, Design, Policy, Powertrain, SimOptions};
use superbike_core::solver::InteriorPoint;

use crate::config::{ModeArg, RunConfig};
use crate::io::{self, RunSummary, TrajectoryRow};
use crate::report::{CompareReport, CompareRow};
use crate::{FitMapArgs, GenMapArgs, Machine, PlotDataArgs, PolicyArg, ReportArgs, RunArgs, SimulateArgs};

// Write errors on stdout (a closed pipe) are ignored.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0:#}")]
    Input(#[from] anyhow::Error),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("{0}")]
    Violation(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Solver(_) => 1,
            Failure::Input(_) => 2,
            Failure::Violation(_) => 3,
        }
    }
}

impl From<superbike_core::Error> for Failure {
    fn from(e: superbike_core::Error) -> Self {
        match e {
            superbike_core::Error::Violation { .. } => Failure::Violation(e.to_string()),
            other => Failure::Input(other.into()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn resolve(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    set(&mut cfg.params, &args.params);
    set(&mut cfg.front_motor, &args.front_motor);
    set(&mut cfg.rear_motor, &args.rear_motor);
    set(&mut cfg.output, &args.out);
    if !args.cycle.is_empty() || !args.builtin.is_empty() {
        cfg.cycles.clone_from(&args.cycle);
        cfg.builtin.clone_from(&args.builtin);
    }
    cfg.dt = args.dt.or(cfg.dt);
    cfg.mode = args.mode.unwrap_or(cfg.mode);
    cfg.solver.max_iter = args.max_iter.or(cfg.solver.max_iter);
    cfg.solver.tol = args.tol.or(cfg.solver.tol);
    cfg.seed = args.seed.or(cfg.seed);
    cfg.strict |= args.strict;
    Ok(cfg)
}

fn cycles(cfg: &RunConfig) -> anyhow::Result<Vec<DrivingCycle>> {
    let mut out = Vec::new();
    for p in &cfg.cycles {
        out.push(io::load_cycle(p)?);
    }
    for name in &cfg.builtin {
        out.push(io::builtin_cycle(name)?);
    }
    if out.is_empty() {
        bail!("no cycle given; use --cycle <csv>, --builtin <name> or the config file");
    }
    if let Some(dt) = cfg.dt {
        out = out
            .into_iter()
            .map(|c| c.resample(dt))
            .collect::<superbike_core::Result<_>>()?;
    }
    Ok(out)
}

fn nlp_options(cfg: &RunConfig) -> anyhow::Result<NlpOptions> {
    Ok(NlpOptions {
        solver: cfg.solver_options()?,
        ..NlpOptions::default()
    })
}

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn mode_dir(mode: Mode) -> &'static str {
    match mode {
        Mode::Free => "free",
        Mode::Adherence => "adherence",
    }
}

fn timed(
    pt: &Powertrain,
    cycle: &DrivingCycle,
    mode: Mode,
    opts: &NlpOptions,
    warm: Option<&[f64]>,
) -> superbike_core::Result<SolveResult> {
    let clock = Instant::now();
    let mut r = nlp::optimize(pt, cycle, mode, opts, &InteriorPoint, warm)?;
    r.wall_time_s = Some(clock.elapsed().as_secs_f64());
    Ok(r)
}

fn solver_log(cycle: &DrivingCycle, r: &SolveResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "cycle {} ({} steps), mode {:?}", cycle.name, cycle.len(), r.mode);
    let _ = writeln!(
        s,
        "status {:?} after {} iterations, {} rebuilds, {:.3} s",
        r.status,
        r.iterations,
        r.rebuilds,
        r.wall_time_s.unwrap_or(0.0)
    );
    let _ = writeln!(s, "objective {:.6}", r.objective);
    let _ = writeln!(
        s,
        "energy drawn {:.6} Wh (program {:.6} Wh), replay rel error {:.3e}",
        r.e_c / 3600.0,
        r.e_c_nlp / 3600.0,
        r.replay_rel_error
    );
    let _ = writeln!(
        s,
        "max complementarity {:.3e}, constraint violation {:.3e}",
        r.complementarity, r.constraint_violation
    );
    match &r.worst_constraint {
        Some((label, v)) => {
            let _ = writeln!(s, "worst constraint: {label} ({v:.3e})");
        }
        None => {
            let _ = writeln!(s, "worst constraint: none violated");
        }
    }
    let _ = writeln!(
        s,
        "{:>5} {:>14} {:>10} {:>10} {:>10} {:>9} {:>9} {:>3}",
        "iter", "objective", "inf_pr", "inf_du", "mu", "alpha_du", "alpha_pr", "ls"
    );
    for h in &r.history {
        let _ = writeln!(
            s,
            "{:>5} {:>14.6e} {:>10.2e} {:>10.2e} {:>10.2e} {:>9.2e} {:>9.2e} {:>3}",
            h.iter, h.objective, h.inf_pr, h.inf_du, h.mu, h.alpha_du, h.alpha_pr, h.ls_trials
        );
    }
    s
}

fn write_solution(dir: &Path, pt: &Powertrain, cycle: &DrivingCycle, r: &SolveResult) -> anyhow::Result<RunSummary> {
    create_dir(dir)?;
    let summary = RunSummary::from_solve(cycle, r, pt.battery.capacity(r.design.s_b));
    io::write_json(&dir.join("design.json"), &summary)?;
    io::write_csv(&dir.join("trajectory.csv"), &io::trajectory_rows(&r.trajectory))?;
    fs::write(dir.join("solver.log"), solver_log(cycle, r))?;
    Ok(summary)
}

fn check_converged(results: &[(&str, &SolveResult)]) -> Result<()> {
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| !r.converged())
        .map(|(name, r)| {
            let worst = r
                .worst_constraint
                .as_ref()
                .map_or_else(String::new, |(l, v)| format!(", worst row {l} ({v:.2e})"));
            format!("{name} {:?}: {:?}{worst}", r.mode, r.status)
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solver(failed.join("; ")))
    }
}

struct CycleSolve {
    fixed: Option<SolveResult>,
    free: Option<SolveResult>,
}

fn solve_cycle(
    pt: &Powertrain,
    cycle: &DrivingCycle,
    mode: ModeArg,
    opts: &NlpOptions,
) -> superbike_core::Result<CycleSolve> {
    Ok(match mode {
        ModeArg::Free => CycleSolve {
            fixed: None,
            free: Some(timed(pt, cycle, Mode::Free, opts, None)?),
        },
        ModeArg::Adherence => CycleSolve {
            fixed: Some(timed(pt, cycle, Mode::Adherence, opts, None)?),
            free: None,
        },
        ModeArg::Both => {
            let fixed = timed(pt, cycle, Mode::Adherence, opts, None)?;
            let free = timed(pt, cycle, Mode::Free, opts, None)?;
            CycleSolve {
                fixed: Some(fixed),
                free: Some(free),
            }
        }
    })
}

fn solve_all(pt: &Powertrain, cycles: &[DrivingCycle], mode: ModeArg, opts: &NlpOptions) -> Result<Vec<CycleSolve>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = cycles
            .iter()
            .map(|c| s.spawn(move || solve_cycle(pt, c, mode, opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .map_err(|_| anyhow!("solver thread panicked"))?
                    .map_err(Failure::from)
            })
            .collect()
    })
}

fn write_compare(out: &Path, report: &CompareReport) -> anyhow::Result<()> {
    io::write_json(&out.join("compare.json"), report)?;
    fs::write(out.join("compare.txt"), report.render())?;
    Ok(())
}

pub fn optimize(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let pt = cfg.powertrain()?;
    let cycles = cycles(&cfg)?;
    let opts = nlp_options(&cfg)?;
    let out = cfg.output_dir();
    let solved = solve_all(&pt, &cycles, cfg.mode, &opts)?;
    let mut report = CompareReport::default();
    let mut all = Vec::new();
    for (cycle, s) in cycles.iter().zip(&solved) {
        let dir = out.join(slug(&cycle.name));
        let mut summaries = Vec::new();
        for r in [&s.fixed, &s.free].into_iter().flatten() {
            let summary = write_solution(&dir.join(mode_dir(r.mode)), &pt, cycle, r)?;
            outln!(
                "{} {:<9} gamma {:.4}  S_m {:.4}  S_b {:.4}  m_v {:.2} kg  E_c {:.2} Wh/km  {:?}",
                cycle.name,
                mode_dir(r.mode),
                r.design.gamma,
                r.design.s_m,
                r.design.s_b,
                r.trajectory.mass.m_total,
                r.wh_per_km(),
                r.status
            );
            summaries.push(summary);
            all.push((cycle.name.as_str(), r));
        }
        if let [fixed, free] = &summaries[..] {
            report.rows.push(CompareRow::new(fixed, free));
        }
    }
    if !report.rows.is_empty() {
        write_compare(&out, &report)?;
        out!("\n{}", report.render());
    }
    check_converged(&all)
}

pub fn compare(args: &RunArgs) -> Result<()> {
    let mut cfg = resolve(args)?;
    cfg.mode = ModeArg::Both;
    let pt = cfg.powertrain()?;
    let cycles = cycles(&cfg)?;
    let opts = nlp_options(&cfg)?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    let solved = solve_all(&pt, &cycles, ModeArg::Both, &opts)?;
    let mut report = CompareReport::default();
    let mut all = Vec::new();
    for (cycle, s) in cycles.iter().zip(&solved) {
        let (Some(fixed), Some(free)) = (&s.fixed, &s.free) else {
            unreachable!()
        };
        let cap = |r: &SolveResult| pt.battery.capacity(r.design.s_b);
        report.rows.push(CompareRow::new(
            &RunSummary::from_solve(cycle, fixed, cap(fixed)),
            &RunSummary::from_solve(cycle, free, cap(free)),
        ));
        all.push((cycle.name.as_str(), fixed));
        all.push((cycle.name.as_str(), free));
    }
    write_compare(&out, &report)?;
    out!("{}", report.render());
    check_converged(&all)
}

pub fn simulate(args: &RunArgs, sim: &SimulateArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let pt = cfg.powertrain()?;
    let cycles = cycles(&cfg)?;
    let out = cfg.output_dir();
    let stored: Option<RunSummary> = sim.design.as_deref().map(io::read_json).transpose()?;
    let opts = SimOptions {
        strict: cfg.strict,
        ..SimOptions::default()
    };
    let mut violations = Vec::new();
    for cycle in &cycles {
        let design = match (&stored, sim.gamma, sim.s_m, sim.s_b) {
            (Some(s), ..) => s.design,
            (None, Some(gamma), Some(s_m), Some(s_b)) => Design { gamma, s_m, s_b },
            _ => simulate::heuristic_design(&pt, cycle)?,
        };
        let forces = stored
            .as_ref()
            .filter(|s| sim.policy == PolicyArg::Replay && s.forces.len() == cycle.len())
            .map(|s| s.forces.as_slice());
        let policy = forces.map_or(Policy::Adherence, Policy::ForceTrace);
        let r = simulate::run(&pt, &design, cycle, policy, &opts)?;
        let dir = out.join(slug(&cycle.name)).join("simulate");
        create_dir(&dir)?;
        let summary = RunSummary::from_sim(cycle, &r, pt.battery.capacity(design.s_b));
        io::write_json(&dir.join("design.json"), &summary)?;
        io::write_csv(&dir.join("trajectory.csv"), &io::trajectory_rows(&r))?;
        outln!(
            "{}: m_v {:.2} kg  E_c {:.2} Wh/km  zeta {}  {} violations",
            cycle.name,
            r.mass.m_total,
            r.wh_per_km,
            r.ledger.map_or_else(|| "n/a".into(), |l| format!("{:.2} %", l.zeta)),
            r.violations.len()
        );
        if let Some(v) = r.violations.first() {
            log::warn!("{}: first violation at step {}: {:?}", cycle.name, v.step, v.kind);
            violations.push(cycle.name.clone());
        }
    }
    if cfg.strict && !violations.is_empty() {
        return Err(Failure::Violation(format!("violations on {}", violations.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    r_squared: f64,
    nrmse: f64,
    samples: usize,
}

fn output_file(args: &RunArgs) -> anyhow::Result<&Path> {
    args.out.as_deref().ok_or_else(|| anyhow!("--out <file> is required"))
}

pub fn fit_map(args: &RunArgs, fit: &FitMapArgs) -> Result<()> {
    let output = output_file(args)?;
    let samples = io::load_loss_map(&fit.input)?;
    let (coeffs, report) = fit::fit_loss_map(&samples)?;
    let text = match fit.machine {
        Machine::Rear => {
            let mut m = machines::RearMotorModel::synthetic_reference();
            m.loss = coeffs;
            toml::to_string(&m).map_err(anyhow::Error::from)?
        }
        Machine::Front => {
            let mut m = machines::FrontMotorModel::synthetic_reference();
            m.loss = coeffs;
            toml::to_string(&m).map_err(anyhow::Error::from)?
        }
    };
    fs::write(output, text).with_context(|| format!("writing {}", output.display()))?;
    let s = FitSummary {
        r_squared: report.r_squared,
        nrmse: report.nrmse,
        samples: report.samples,
    };
    outln!(
        "R2 {:.6}  NRMSE {:.3} %  ({} samples)",
        s.r_squared,
        100.0 * s.nrmse,
        s.samples
    );
    Ok(())
}

pub fn gen_map(args: &RunArgs, gen: &GenMapArgs) -> Result<()> {
    let output = output_file(args)?;
    let cfg = resolve(args)?;
    let pt = cfg.powertrain()?;
    if gen.n_omega < 2 || gen.n_torque < 2 {
        return Err(anyhow!("the grid needs at least two speeds and two torques").into());
    }
    let mut map = match gen.machine {
        Machine::Rear => machines::synthetic_map(
            &pt.rear.loss,
            pt.rear.t_max,
            pt.rear.p_max,
            pt.rear.omega_max,
            gen.n_omega,
            gen.n_torque,
        ),
        Machine::Front => machines::synthetic_map(
            &pt.front.loss,
            pt.front.t_max,
            pt.front.p_max,
            pt.front.omega_max,
            gen.n_omega,
            gen.n_torque,
        ),
    };
    if gen.noise > 0.0 {
        let normal = Normal::new(0.0, gen.noise).map_err(|e| anyhow!("noise level: {e}"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
        for s in &mut map {
            *s = LossMapSample {
                p_loss: s.p_loss * (1.0 + normal.sample(&mut rng)),
                ..*s
            };
        }
    } else if gen.noise < 0.0 {
        return Err(anyhow!("noise level must be non-negative").into());
    }
    io::write_loss_map(output, &map)?;
    Ok(())
}

#[derive(Serialize)]
struct SpeedRow {
    t: f64,
    v: f64,
}

#[derive(Serialize)]
struct PowerRow {
    t: f64,
    p_v: f64,
    p_m_f: f64,
    p_m_r: f64,
    p_brk: f64,
    p_b: f64,
}

#[derive(Serialize)]
struct SigmaRow {
    t: f64,
    sigma_a: f64,
    sigma_fixed: f64,
    sigma_free: f64,
}

pub fn plot_data(args: &RunArgs, plot: &PlotDataArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("plot"));
    let fixed: Vec<TrajectoryRow> = io::read_csv(&plot.fixed)?;
    let free: Vec<TrajectoryRow> = io::read_csv(&plot.free)?;
    if fixed.len() != free.len() || fixed.iter().zip(&free).any(|(a, b)| a.t != b.t) {
        return Err(anyhow!("the two trajectories are not on the same time grid").into());
    }
    let (Some(first), Some(last)) = (free.first(), free.last()) else {
        return Err(anyhow!("empty trajectory").into());
    };
    let mut from = plot.from.unwrap_or(first.t);
    let mut to = plot.to.unwrap_or(last.t);
    if from > to {
        return Err(anyhow!("window start {from} is after its end {to}").into());
    }
    if from < first.t || to > last.t {
        log::warn!(
            "window [{from}, {to}] s clipped to the trajectory [{}, {}] s",
            first.t,
            last.t
        );
        from = from.max(first.t);
        to = to.min(last.t);
    }
    let window: Vec<usize> = (0..free.len())
        .filter(|&k| free[k].t >= from && free[k].t <= to)
        .collect();
    create_dir(&out)?;
    let speed: Vec<_> = window
        .iter()
        .map(|&k| SpeedRow {
            t: free[k].t,
            v: free[k].v,
        })
        .collect();
    let power: Vec<_> = window
        .iter()
        .map(|&k| {
            let r = &free[k];
            PowerRow {
                t: r.t,
                p_v: r.p_v,
                p_m_f: r.p_m_f,
                p_m_r: r.p_m_r,
                p_brk: (r.f_brk_f + r.f_brk_r) * r.v,
                p_b: r.p_b,
            }
        })
        .collect();
    let sigma: Vec<_> = window
        .iter()
        .map(|&k| SigmaRow {
            t: free[k].t,
            sigma_a: fixed[k].sigma_a,
            sigma_fixed: fixed[k].sigma,
            sigma_free: free[k].sigma,
        })
        .collect();
    io::write_csv(&out.join("speed.csv"), &speed)?;
    io::write_csv(&out.join("power.csv"), &power)?;
    io::write_csv(&out.join("sigma.csv"), &sigma)?;
    outln!("{} rows in [{from}, {to}] s written to {}", window.len(), out.display());
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    if let Ok(report) = serde_json::from_str::<CompareReport>(&text) {
        out!("{}", report.render());
        return Ok(());
    }
    let s: RunSummary = serde_json::from_str(&text)
        .with_context(|| format!("{} is neither a comparison nor a design summary", args.input.display()))?;
    let p = &s.performance;
    outln!("cycle          {} ({} steps)", s.cycle, s.steps);
    outln!(
        "design         gamma {:.4}  S_m {:.4}  S_b {:.4}",
        s.design.gamma,
        s.design.s_m,
        s.design.s_b
    );
    outln!(
        "mass           {:.2} kg (battery {:.2}, rear motor {:.2}, fixed {:.2})",
        s.mass.m_total,
        s.mass.m_battery,
        s.mass.m_rear_motor,
        s.mass.m_fixed
    );
    outln!("battery        {:.2} kWh", s.e_b_max_kwh);
    outln!("rear peak      {:.2} kW", s.p_m_max_r_kw);
    outln!("consumption    {:.2} Wh/km ({:.2} Wh)", s.wh_per_km, s.e_c_j / 3600.0);
    if let Some(l) = s.ledger {
        outln!("zeta / eta     {:.2} % / {:.2} %", l.zeta, l.eta_avg);
    }
    outln!(
        "margins        accel {:.4} s  top speed {:.2}  power grade {:.2}  torque grade {:.2}  range {:.2}",
        p.accel,
        p.top_speed,
        p.power_grade,
        p.torque_grade,
        p.range
    );
    outln!("violations     {}", s.violations);
    if let Some(i) = &s.solve {
        outln!(
            "solve          {:?} {} after {} iterations, replay rel error {:.2e}",
            i.mode,
            i.status,
            i.iterations,
            i.replay_rel_error
        );
        if let Some((label, v)) = &i.worst_constraint {
            outln!("worst row      {label} ({v:.2e})");
        }
    }
    Ok(())
}
