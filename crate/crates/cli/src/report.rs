//! Side-by-side tables for adherence-split and free-split designs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::io::RunSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    /// Vehicle mass, kg.
    pub m_v: f64,
    pub e_b_max_kwh: f64,
    pub p_m_max_r_kw: f64,
    pub wh_per_km: f64,
    /// Regenerative ratio, %; absent when the battery is never drawn.
    pub zeta: Option<f64>,
    /// Average efficiency, %.
    pub eta: Option<f64>,
    pub converged: bool,
}

impl From<&RunSummary> for ModeMetrics {
    fn from(s: &RunSummary) -> Self {
        Self {
            m_v: s.mass.m_total,
            e_b_max_kwh: s.e_b_max_kwh,
            p_m_max_r_kw: s.p_m_max_r_kw,
            wh_per_km: s.wh_per_km,
            zeta: s.ledger.map(|l| l.zeta),
            eta: s.ledger.map(|l| l.eta_avg),
            converged: s.solve.as_ref().is_none_or(|i| i.converged),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub cycle: String,
    pub fixed: ModeMetrics,
    pub free: ModeMetrics,
}

impl CompareRow {
    pub fn new(fixed: &RunSummary, free: &RunSummary) -> Self {
        Self {
            cycle: fixed.cycle.clone(),
            fixed: fixed.into(),
            free: free.into(),
        }
    }

    /// Percent change of the free-split design relative to the adherence split.
    pub fn deltas(&self) -> [f64; 4] {
        let (a, b) = (&self.fixed, &self.free);
        [
            delta(a.m_v, b.m_v),
            delta(a.e_b_max_kwh, b.e_b_max_kwh),
            delta(a.p_m_max_r_kw, b.p_m_max_r_kw),
            delta(a.wh_per_km, b.wh_per_km),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

pub fn delta(fixed: f64, free: f64) -> f64 {
    100.0 * (free - fixed) / fixed
}

pub fn format_delta(d: f64) -> String {
    format!("({d:+.2}%)")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:<16} {:>12} {:>12} {:>11}",
            "cycle", "quantity", "sigma_a", "sigma*", "delta"
        );
        for row in &self.rows {
            let d = row.deltas();
            let (a, b) = (&row.fixed, &row.free);
            let lines = [
                ("m_v [kg]", a.m_v, b.m_v, d[0]),
                ("E_b,max [kWh]", a.e_b_max_kwh, b.e_b_max_kwh, d[1]),
                ("P_m,max^r [kW]", a.p_m_max_r_kw, b.p_m_max_r_kw, d[2]),
                ("E_c [Wh/km]", a.wh_per_km, b.wh_per_km, d[3]),
            ];
            for (i, (name, x, y, dd)) in lines.into_iter().enumerate() {
                let label = if i == 0 { row.cycle.as_str() } else { "" };
                let _ = writeln!(
                    out,
                    "{label:<14} {name:<16} {x:>12.2} {y:>12.2} {:>11}",
                    format_delta(dd)
                );
            }
            if !(a.converged && b.converged) {
                let _ = writeln!(out, "{:<14} warning: a solve did not converge", "");
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<14} {:>12} {:>12} {:>12} {:>12}",
            "cycle", "zeta sigma_a", "zeta sigma*", "eta sigma_a", "eta sigma*"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>12} {:>12} {:>12} {:>12}",
                row.cycle,
                opt(row.fixed.zeta),
                opt(row.free.zeta),
                opt(row.fixed.eta),
                opt(row.free.eta)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltas_use_the_adherence_design_as_base() {
        assert_eq!(format_delta(delta(100.0, 77.64)), "(-22.36%)");
        assert_eq!(format_delta(delta(50.0, 51.0)), "(+2.00%)");
    }

    fn metrics(wh: f64) -> ModeMetrics {
        ModeMetrics {
            m_v: 250.0,
            e_b_max_kwh: 8.0,
            p_m_max_r_kw: 60.0,
            wh_per_km: wh,
            zeta: Some(10.0),
            eta: None,
            converged: true,
        }
    }

    #[test]
    fn render_has_one_block_per_cycle() {
        let report = CompareReport {
            rows: vec![CompareRow {
                cycle: "ECE-15".into(),
                fixed: metrics(80.0),
                free: metrics(79.0),
            }],
        };
        let text = report.render();
        assert!(text.contains("ECE-15"));
        assert!(text.contains("(-1.25%)"));
        assert!(text.contains("n/a"));
        assert_eq!(text.matches("E_c [Wh/km]").count(), 1);
    }
}
