//! CSV and JSON formats: cycles, loss maps, trajectories and run summaries.

use std::fs::{self, File};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use superbike_core::cycle::{standard, DrivingCycle};
use superbike_core::machines::LossMapSample;
use superbike_core::metrics::EnergyLedger;
use superbike_core::nlp::{Mode, SolveResult};
use superbike_core::performance::PerformanceReport;
use superbike_core::simulate::{Design, ForceCommand, SimResult};
use superbike_core::vehicle::MassBreakdown;

pub const BUILTIN_CYCLES: [&str; 4] = ["ece15", "eudc", "sprint", "constant"];

pub fn builtin_cycle(name: &str) -> Result<DrivingCycle> {
    Ok(match name {
        "ece15" => standard::ece15(),
        "eudc" => standard::eudc(),
        "sprint" => standard::sprint_brake(),
        "constant" => standard::constant_speed(25.0, 120.0, 1.0),
        other => bail!(
            "unknown built-in cycle {other:?}; expected one of {}",
            BUILTIN_CYCLES.join(", ")
        ),
    })
}

/// Reads `t,v[,theta][,a]` columns in SI units, in any order.
pub fn load_cycle(path: &Path) -> Result<DrivingCycle> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening cycle {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(it), Some(iv)) = (col("t"), col("v")) else {
        bail!("{}: header must contain t and v", path.display());
    };
    let (itheta, ia) = (col("theta"), col("a"));
    let (mut t, mut v, mut theta, mut a) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| anyhow!("missing field"))?
                .parse::<f64>()
                .with_context(|| format!("{} row {}", path.display(), row + 2))
        };
        t.push(get(it)?);
        v.push(get(iv)?);
        if let Some(i) = itheta {
            theta.push(get(i)?);
        }
        if let Some(i) = ia {
            a.push(get(i)?);
        }
    }
    let name = path
        .file_stem()
        .map_or("cycle".into(), |s| s.to_string_lossy().into_owned());
    let cycle = DrivingCycle::from_samples(name, t, v, ia.map(|_| a), itheta.map(|_| theta))
        .with_context(|| format!("validating {}", path.display()))?;
    Ok(cycle)
}

pub fn load_loss_map(path: &Path) -> Result<Vec<LossMapSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening loss map {}", path.display()))?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{} row {}", path.display(), i + 2)))
        .collect()
}

pub fn write_loss_map(path: &Path, samples: &[LossMapSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// One trajectory step: the blend state plus speeds, torques and powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub v: f64,
    pub f_v: f64,
    pub p_v: f64,
    pub sigma_a: f64,
    pub sigma: f64,
    pub f_v_f: f64,
    pub f_v_r: f64,
    pub f_m_f: f64,
    pub f_m_r: f64,
    pub f_brk_f: f64,
    pub f_brk_r: f64,
    pub f_tr_f: f64,
    pub mu_r: f64,
    pub omega_f: f64,
    pub omega_r: f64,
    pub torque_f: f64,
    pub torque_r: f64,
    pub p_m_f: f64,
    pub p_m_r: f64,
    pub loss_f: f64,
    pub loss_r: f64,
    pub p_ac: f64,
    pub p_b: f64,
    /// Stored energy at the end of the step, J.
    pub e_b: f64,
}

pub fn trajectory_rows(sim: &SimResult) -> Vec<TrajectoryRow> {
    sim.steps
        .iter()
        .zip(&sim.e_b[1..])
        .map(|(s, &e_b)| TrajectoryRow {
            t: s.t,
            v: s.v,
            f_v: s.f_v,
            p_v: s.p_v,
            sigma_a: s.sigma_a,
            sigma: s.blend.sigma,
            f_v_f: s.blend.f_v_f,
            f_v_r: s.blend.f_v_r,
            f_m_f: s.blend.f_m_f,
            f_m_r: s.blend.f_m_r,
            f_brk_f: s.blend.f_brk_f,
            f_brk_r: s.blend.f_brk_r,
            f_tr_f: s.blend.f_tr_f,
            mu_r: s.blend.mu_r,
            omega_f: s.omega_f,
            omega_r: s.omega_r,
            torque_f: s.torque_f,
            torque_r: s.torque_r,
            p_m_f: s.p_m_f,
            p_m_r: s.p_m_r,
            loss_f: s.loss_f,
            loss_r: s.loss_r,
            p_ac: s.p_ac,
            p_b: s.p_b,
            e_b,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("{} row {}", path.display(), i + 2)))
        .collect()
}

/// Outcome of the program solve behind a [`RunSummary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub mode: Mode,
    pub status: String,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub replay_rel_error: f64,
    pub complementarity: f64,
    pub constraint_violation: f64,
    pub worst_constraint: Option<(String, f64)>,
    pub rebuilds: usize,
}

/// Design, headline metrics and the force trace that reproduces them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cycle: String,
    pub steps: usize,
    pub design: Design,
    pub mass: MassBreakdown,
    /// Installed capacity, kWh.
    pub e_b_max_kwh: f64,
    /// Peak rear machine power over the cycle, kW.
    pub p_m_max_r_kw: f64,
    pub e_c_j: f64,
    pub wh_per_km: f64,
    pub ledger: Option<EnergyLedger>,
    pub performance: PerformanceReport,
    pub violations: usize,
    pub solve: Option<SolveInfo>,
    /// Wheel forces per step; replaying them reproduces the energy figures.
    pub forces: Vec<ForceCommand>,
}

impl RunSummary {
    pub fn from_sim(cycle: &DrivingCycle, sim: &SimResult, capacity_j: f64) -> Self {
        Self {
            cycle: cycle.name.clone(),
            steps: cycle.len(),
            design: sim.design,
            mass: sim.mass,
            e_b_max_kwh: capacity_j / superbike_core::battery::J_PER_KWH,
            p_m_max_r_kw: sim.peak_rear_power() / 1e3,
            e_c_j: sim.e_c,
            wh_per_km: sim.wh_per_km,
            ledger: sim.ledger,
            performance: sim.performance,
            violations: sim.violations.len(),
            solve: None,
            forces: sim.force_trace(),
        }
    }

    pub fn from_solve(cycle: &DrivingCycle, r: &SolveResult, capacity_j: f64) -> Self {
        let mut s = Self::from_sim(cycle, &r.trajectory, capacity_j);
        s.solve = Some(SolveInfo {
            mode: r.mode,
            status: format!("{:?}", r.status),
            converged: r.converged(),
            iterations: r.iterations,
            objective: r.objective,
            replay_rel_error: r.replay_rel_error,
            complementarity: r.complementarity,
            constraint_violation: r.constraint_violation,
            worst_constraint: r.worst_constraint.clone(),
            rebuilds: r.rebuilds,
        });
        s
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_cycle(path: &Path, cycle: &DrivingCycle) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "v", "theta"])?;
        for k in 0..cycle.len() {
            w.serialize((cycle.t[k], cycle.v[k], cycle.theta[k]))?;
        }
        w.flush()?;
        Ok(())
    }

    #[test]
    fn cycle_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let c = DrivingCycle::new("c", 0.5, vec![0.0, 1.0, 3.0, 2.0], Some(vec![0.0, 0.01, 0.02, 0.0])).unwrap();
        write_cycle(&p, &c).unwrap();
        let back = load_cycle(&p).unwrap();
        assert_eq!((back.t, back.v, back.theta), (c.t, c.v, c.theta));
    }

    #[test]
    fn inconsistent_acceleration_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, "t,v,a\n0,0,5\n1,1,0\n2,1,0\n").unwrap();
        assert!(load_cycle(&p).is_err());
        fs::write(&p, "t,v,a\n0,0,1\n1,1,0\n2,1,0\n").unwrap();
        assert!(load_cycle(&p).is_ok());
    }

    #[test]
    fn missing_columns_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, "time,speed\n0,0\n1,1\n").unwrap();
        let e = load_cycle(&p).unwrap_err();
        assert!(format!("{e:#}").contains("t and v"));
    }

    #[test]
    fn unknown_builtin_lists_choices() {
        let e = builtin_cycle("wltp").unwrap_err().to_string();
        assert!(e.contains("ece15"));
    }
}
