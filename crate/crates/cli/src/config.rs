//! Run configuration: a TOML file whose values can be overridden on the
//! command line. Relative paths resolve against the directory of the file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use superbike_core::battery::{BatteryModel, J_PER_KWH};
use superbike_core::machines::{FrontMotorModel, RearMotorModel};
use superbike_core::simulate::Powertrain;
use superbike_core::solver::SolverOptions;
use superbike_core::vehicle::VehicleParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Free,
    Adherence,
    #[default]
    Both,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    /// Reference pack capacity, kWh.
    pub capacity_kwh: f64,
    /// Reference pack mass, kg.
    pub mass_kg: f64,
}

impl Default for BatterySection {
    fn default() -> Self {
        Self {
            capacity_kwh: 10.0,
            mass_kg: 50.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<PathBuf>,
    pub front_motor: Option<PathBuf>,
    pub rear_motor: Option<PathBuf>,
    pub battery: BatterySection,
    /// Cycle CSV files.
    pub cycles: Vec<PathBuf>,
    /// Bundled cycles by name.
    pub builtin: Vec<String>,
    /// Resampling step, s.
    pub dt: Option<f64>,
    pub mode: ModeArg,
    pub solver: SolverSection,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub strict: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.params,
            &mut cfg.front_motor,
            &mut cfg.rear_motor,
            &mut cfg.output,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        for p in &mut cfg.cycles {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn powertrain(&self) -> Result<Powertrain> {
        let vehicle: VehicleParams = match &self.params {
            Some(p) => read_toml(p)?,
            None => VehicleParams::reference(),
        };
        let front: FrontMotorModel = match &self.front_motor {
            Some(p) => read_toml(p)?,
            None => FrontMotorModel::synthetic_reference(),
        };
        let rear: RearMotorModel = match &self.rear_motor {
            Some(p) => read_toml(p)?,
            None => RearMotorModel::synthetic_reference(),
        };
        let battery = BatteryModel::from_params(&vehicle, self.battery.capacity_kwh * J_PER_KWH, self.battery.mass_kg);
        let pt = Powertrain {
            vehicle,
            front,
            rear,
            battery,
        };
        pt.validate()?;
        Ok(pt)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let mut o = superbike_core::nlp::NlpOptions::default().solver;
        if let Some(n) = self.solver.max_iter {
            if n == 0 {
                bail!("max_iter must be positive");
            }
            o.max_iter = n;
        }
        if let Some(t) = self.solver.tol {
            if !(t > 0.0) {
                bail!("tol must be positive, got {t}");
            }
            o.tol = t;
        }
        Ok(o)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_reference_data() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.powertrain().unwrap(), Powertrain::reference());
        assert_eq!(cfg.mode, ModeArg::Both);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("cycle = 'a.csv'").is_err());
    }

    #[test]
    fn vehicle_keys_use_symbol_names() {
        let p: VehicleParams = toml::from_str("CdA = 0.3\nP_aux = 50.0\nD_r = 80000.0\nt_a_max = 3.0").unwrap();
        assert_eq!((p.cda, p.p_aux, p.d_r, p.t_a_max), (0.3, 50.0, 80_000.0, 3.0));
        assert_eq!(p.m_r, VehicleParams::reference().m_r);
    }

    #[test]
    fn bundled_vehicle_file_matches_the_builtin_constants() {
        let p: VehicleParams = toml::from_str(include_str!("../../../configs/vehicle.toml")).unwrap();
        let q = VehicleParams::reference();
        assert!((p.theta_max - q.theta_max).abs() < 1e-15);
        assert_eq!(
            VehicleParams {
                theta_max: q.theta_max,
                ..p
            },
            q
        );
    }

    #[test]
    fn bad_solver_settings_are_input_errors() {
        let cfg: RunConfig = toml::from_str("[solver]\ntol = -1.0").unwrap();
        assert!(cfg.solver_options().is_err());
    }
}
