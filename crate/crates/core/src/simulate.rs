//! Forward simulation of a sized powertrain over a driving cycle.
//!
//! Each step turns the force demand into front and rear wheel forces
//! according to a [`Policy`], then evaluates machine losses, inverter and
//! battery power, and integrates the stored energy. Limit, adherence and
//! state-of-charge violations are collected rather than fatal unless
//! [`SimOptions::strict`] is set.

use alloc::format;
use alloc::vec::Vec;

use crate::battery::{self, BatteryModel};
use crate::blending::{self, BlendState};
use crate::cycle::DrivingCycle;
use crate::error::{Error, Result};
use crate::machines::{self, FrontMotorModel, LimitViolation, Losses, MotorState, RearMotorModel};
use crate::metrics::{self, EnergyLedger};
use crate::performance::{self, PerformanceReport};
use crate::vehicle::{self, MassBreakdown, VehicleParams};

pub const GAMMA_MIN: f64 = 1.0;

/// Sizing decision: rear gear ratio and the two scale factors.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Design {
    pub gamma: f64,
    pub s_m: f64,
    pub s_b: f64,
}

/// Everything that stays fixed while a design is sized.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Powertrain {
    pub vehicle: VehicleParams,
    pub front: FrontMotorModel,
    pub rear: RearMotorModel,
    pub battery: BatteryModel,
}

impl Powertrain {
    /// Published vehicle constants with the synthetic reference machines and pack.
    pub fn reference() -> Self {
        let vehicle = VehicleParams::reference();
        let battery = BatteryModel::synthetic_reference(&vehicle);
        Self {
            vehicle,
            front: FrontMotorModel::synthetic_reference(),
            rear: RearMotorModel::synthetic_reference(),
            battery,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.front.validate()?;
        self.rear.validate()?;
        self.battery.validate()?;
        if self.battery.eta_b != self.vehicle.eta_b
            || self.battery.xi_min != self.vehicle.xi_min
            || self.battery.xi_max != self.vehicle.xi_max
        {
            return Err(Error::InvalidParameter {
                name: "battery",
                reason: "efficiency and state-of-charge window must match the vehicle parameters".into(),
            });
        }
        Ok(())
    }

    pub fn mass(&self, d: &Design) -> Result<MassBreakdown> {
        vehicle::total_mass(&self.vehicle, self.battery.mbar_b, self.rear.mbar_m, d.s_b, d.s_m)
    }

    /// Admissible gear ratio interval.
    pub fn gamma_bounds(&self) -> Result<(f64, f64)> {
        let upper = machines::gamma_upper_bound(&self.rear, self.vehicle.r_wr, self.vehicle.v_max);
        if upper < GAMMA_MIN {
            return Err(Error::InfeasibleGearBox {
                lower: GAMMA_MIN,
                upper,
            });
        }
        Ok((GAMMA_MIN, upper))
    }

    /// Rejects cycles that no admissible design can follow.
    pub fn check_cycle(&self, cycle: &DrivingCycle) -> Result<()> {
        let v = cycle.max_speed();
        if v > self.vehicle.v_max * (1.0 + 1e-12) {
            return Err(Error::OverSpeed {
                machine: "rear",
                speed: v,
            });
        }
        if machines::front_speed(v, self.vehicle.r_wf) > self.front.omega_max * (1.0 + 1e-12) {
            return Err(Error::OverSpeed {
                machine: "front",
                speed: v,
            });
        }
        Ok(())
    }

    /// Largest rear wheel force in traction at speed `v`.
    pub fn rear_traction_capacity(&self, d: &Design, v: f64) -> f64 {
        let p = &self.vehicle;
        let torque = self.rear.t_max * d.s_m * d.gamma * p.eta_gb / p.r_wr;
        if v > 0.0 {
            torque.min(self.rear.p_max * d.s_m * p.eta_gb / v)
        } else {
            torque
        }
    }

    /// Largest rear wheel force magnitude in regeneration at speed `v`.
    pub fn rear_regen_capacity(&self, d: &Design, v: f64) -> f64 {
        let p = &self.vehicle;
        let torque = self.rear.t_max * d.s_m * d.gamma / (p.eta_gb * p.r_wr);
        if v > 0.0 {
            torque.min(self.rear.p_max * d.s_m / (p.eta_gb * v))
        } else {
            torque
        }
    }
}

/// Wheel forces commanded at one step, N.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForceCommand {
    pub sigma: f64,
    pub f_m_f: f64,
    pub f_m_r: f64,
    pub f_brk_f: f64,
    pub f_brk_r: f64,
    pub f_tr_f: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum Policy<'a> {
    /// Adherence split clamped to `[0, 1]`, serial braking, saturation transfer.
    Adherence,
    /// Supplied split per step, otherwise as [`Policy::Adherence`].
    SigmaTrace(&'a [f64]),
    /// Replays fully specified wheel forces.
    ForceTrace(&'a [ForceCommand]),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub strict: bool,
    /// Relative allowance on machine limits and the state-of-charge window.
    pub rel_tol: f64,
    /// Allowed force-balance residual, N.
    pub balance_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            strict: false,
            rel_tol: 1e-6,
            balance_tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum ViolationKind {
    Limit(LimitViolation),
    RearAdherence {
        mu: f64,
        limit: f64,
    },
    FrontLock {
        sigma: f64,
        sigma_a: f64,
    },
    /// Rear traction demand beyond the rear machine capacity, N.
    DemandInfeasible {
        shortfall: f64,
    },
    Balance {
        residual: f64,
    },
    Sign {
        field: &'static str,
        value: f64,
    },
    StateOfCharge {
        energy: f64,
        lower: f64,
        upper: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub t: f64,
    pub v: f64,
    pub f_v: f64,
    pub p_v: f64,
    pub sigma_a: f64,
    pub blend: BlendState,
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
}

/// Where the battery energy went, J. `total` is the sum of the terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyAudit {
    pub wheel: f64,
    pub friction_brakes: f64,
    pub gearbox: f64,
    pub front_losses: f64,
    pub rear_losses: f64,
    pub inverter: f64,
    pub battery: f64,
    pub auxiliaries: f64,
    pub total: f64,
}

impl EnergyAudit {
    fn add(&mut self, dt: f64, terms: [f64; 8]) {
        for (slot, x) in [
            &mut self.wheel,
            &mut self.friction_brakes,
            &mut self.gearbox,
            &mut self.front_losses,
            &mut self.rear_losses,
            &mut self.inverter,
            &mut self.battery,
            &mut self.auxiliaries,
        ]
        .into_iter()
        .zip(terms)
        {
            *slot += x * dt;
        }
    }

    fn close(&mut self) {
        self.total = self.wheel
            + self.friction_brakes
            + self.gearbox
            + self.front_losses
            + self.rear_losses
            + self.inverter
            + self.battery
            + self.auxiliaries;
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimResult {
    pub design: Design,
    pub mass: MassBreakdown,
    pub steps: Vec<StepRecord>,
    /// Stored energy before the first step and after every step, J.
    pub e_b: Vec<f64>,
    /// Energy drawn from the battery over the cycle, J.
    pub e_c: f64,
    pub wh_per_km: f64,
    pub ledger: Option<EnergyLedger>,
    pub audit: EnergyAudit,
    pub performance: PerformanceReport,
    pub violations: Vec<Violation>,
}

impl SimResult {
    pub fn sigma_trace(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.blend.sigma).collect()
    }

    pub fn force_trace(&self) -> Vec<ForceCommand> {
        self.steps
            .iter()
            .map(|s| ForceCommand {
                sigma: s.blend.sigma,
                f_m_f: s.blend.f_m_f,
                f_m_r: s.blend.f_m_r,
                f_brk_f: s.blend.f_brk_f,
                f_brk_r: s.blend.f_brk_r,
                f_tr_f: s.blend.f_tr_f,
            })
            .collect()
    }

    /// Peak rear shaft power magnitude, W.
    pub fn peak_rear_power(&self) -> f64 {
        self.steps.iter().map(|s| s.p_m_r.abs()).fold(0.0, f64::max)
    }
}

struct Recorder {
    strict: bool,
    out: Vec<Violation>,
}

impl Recorder {
    fn push(&mut self, step: usize, kind: ViolationKind) -> Result<()> {
        if self.strict {
            return Err(Error::Violation {
                step,
                kind: format!("{kind:?}"),
            });
        }
        self.out.push(Violation { step, kind });
        Ok(())
    }
}

/// Simulates `design` over `cycle`.
pub fn run(
    pt: &Powertrain,
    design: &Design,
    cycle: &DrivingCycle,
    policy: Policy<'_>,
    opts: &SimOptions,
) -> Result<SimResult> {
    pt.check_cycle(cycle)?;
    if !(design.gamma > 0.0) {
        return Err(Error::Domain {
            what: "gamma",
            value: design.gamma,
        });
    }
    let mass = pt.mass(design)?;
    let n = cycle.len();
    match policy {
        Policy::SigmaTrace(s) if s.len() != n => return Err(Error::LengthMismatch("sigma trace and cycle")),
        Policy::ForceTrace(f) if f.len() != n => return Err(Error::LengthMismatch("force trace and cycle")),
        _ => {}
    }
    let p = &pt.vehicle;
    let m = mass.m_total;
    let mut rec = Recorder {
        strict: opts.strict,
        out: Vec::new(),
    };
    let mut steps = Vec::with_capacity(n);
    let mut audit = EnergyAudit::default();

    for k in 0..n {
        let (v, a, theta) = (cycle.v[k], cycle.a[k], cycle.theta[k]);
        let parked = vehicle::is_parked(v, a);
        let f_v = vehicle::demand_force(p, m, v, a, theta);
        let sa = blending::sigma_adherence(p, m, f_v, theta);
        let cap_f = pt.front.force_capacity(v, p.r_wf);

        let blend = match policy {
            Policy::Adherence => split(pt, design, k, v, f_v, sa.clamped, cap_f, &mut rec)?,
            Policy::SigmaTrace(s) => {
                let sigma = s[k];
                if !(0.0..=1.0).contains(&sigma) {
                    return Err(Error::Domain {
                        what: "sigma",
                        value: sigma,
                    });
                }
                if !parked && sigma > sa.raw + 1e-9 {
                    rec.push(k, ViolationKind::FrontLock { sigma, sigma_a: sa.raw })?;
                }
                split(pt, design, k, v, f_v, sigma, cap_f, &mut rec)?
            }
            Policy::ForceTrace(f) => replay(k, f_v, &f[k], &sa, parked, opts, &mut rec)?,
        };

        let (x_f, x_r) = blend.wheel_forces();
        let mu_r = blending::rear_adherence(p, m, x_f, x_r, theta)?;
        if mu_r < p.mu_brk_peak_r * (1.0 + opts.rel_tol) {
            rec.push(
                k,
                ViolationKind::RearAdherence {
                    mu: mu_r,
                    limit: p.mu_brk_peak_r,
                },
            )?;
        }
        let blend = BlendState { mu_r, ..blend };

        let omega_f = machines::front_speed(v, p.r_wf);
        let omega_r = machines::rear_speed(v, design.gamma, p.r_wr);
        let torque_f = blend.f_m_f * p.r_wf;
        let torque_r = machines::rear_torque(blend.f_m_r, design.gamma, p.r_wr, p.eta_gb);
        let p_m_f = blend.f_m_f * v;
        let p_m_r = machines::rear_mech_power(blend.f_m_r, v, p.eta_gb);
        let state = MotorState {
            front_force: blend.f_m_f,
            front_speed: omega_f,
            rear_power: p_m_r,
            rear_torque: torque_r,
            rear_speed: omega_r,
        };
        for lv in machines::check_limits(&pt.front, &pt.rear, p.r_wf, design.s_m, &state, opts.rel_tol) {
            rec.push(k, ViolationKind::Limit(lv))?;
        }
        let (loss_f, loss_r) = if parked {
            (0.0, Losses::default())
        } else {
            (
                machines::front_losses(&pt.front, omega_f, torque_f)?,
                machines::rear_losses(&pt.rear, design.s_m, omega_r, torque_r)?,
            )
        };
        let p_ac = machines::total_ac_power(p_m_f, loss_f, p_m_r, &loss_r);
        let q = battery::inverter_dc_power(p_ac, p.eta_inv, p.p_aux);
        let p_b = battery::cell_power(q, p.eta_b);

        let p_v = f_v * v;
        audit.add(
            cycle.dt,
            [
                p_v,
                -(blend.f_brk_f + blend.f_brk_r) * v,
                p_m_r - blend.f_m_r * v,
                loss_f,
                loss_r.total(),
                (q - p.p_aux) - p_ac,
                p_b - q,
                p.p_aux,
            ],
        );
        steps.push(StepRecord {
            t: cycle.t[k],
            v,
            f_v,
            p_v,
            sigma_a: sa.raw,
            blend,
            omega_f,
            omega_r,
            torque_f,
            torque_r,
            p_m_f,
            p_m_r,
            loss_f,
            loss_r: loss_r.total(),
            p_ac,
            p_b,
        });
    }
    audit.close();

    let p_b: Vec<f64> = steps.iter().map(|s| s.p_b).collect();
    let e0 = pt.battery.initial_energy(design.s_b);
    let e_b = battery::integrate(e0, &p_b, cycle.dt);
    let cap = pt.battery.capacity(design.s_b);
    let (lower, upper) = (pt.battery.xi_min * cap, pt.battery.xi_max * cap);
    for (k, &e) in e_b.iter().enumerate().skip(1) {
        if e < lower - opts.rel_tol * cap || e > upper + opts.rel_tol * cap {
            rec.push(
                k - 1,
                ViolationKind::StateOfCharge {
                    energy: e,
                    lower,
                    upper,
                },
            )?;
        }
    }
    let e_c = battery::consumed(&e_b);
    let p_v: Vec<f64> = steps.iter().map(|s| s.p_v).collect();
    let ledger = metrics::ledger(&p_v, &p_b, cycle.dt).ok();
    let performance = PerformanceReport::evaluate(
        p,
        &pt.front,
        &pt.rear,
        pt.battery.ebar_max,
        m,
        design.gamma,
        design.s_m,
        design.s_b,
        e_c,
        cycle.length_m,
    );
    Ok(SimResult {
        design: *design,
        mass,
        steps,
        e_b,
        e_c,
        wh_per_km: e_c / battery::J_PER_WH / (cycle.length_m / 1000.0),
        ledger,
        audit,
        performance,
        violations: rec.out,
    })
}

#[allow(clippy::too_many_arguments)]
fn split(
    pt: &Powertrain,
    d: &Design,
    k: usize,
    v: f64,
    f_v: f64,
    sigma: f64,
    cap_f: f64,
    rec: &mut Recorder,
) -> Result<BlendState> {
    let (ff, fr) = blending::split_demand(f_v, sigma);
    let mut s = BlendState {
        sigma,
        f_v_f: ff,
        ..BlendState::default()
    };
    if f_v >= 0.0 {
        s.f_tr_f = blending::saturation_transfer(ff, cap_f);
        s.f_m_f = ff - s.f_tr_f;
        s.f_v_r = fr + s.f_tr_f;
        s.f_m_r = s.f_v_r;
        let cap_r = pt.rear_traction_capacity(d, v);
        if s.f_m_r > cap_r * (1.0 + 1e-9) {
            rec.push(
                k,
                ViolationKind::DemandInfeasible {
                    shortfall: s.f_m_r - cap_r,
                },
            )?;
        }
    } else {
        (s.f_m_f, s.f_brk_f) = blending::serial_brake_repartition(ff, cap_f);
        s.f_v_r = fr;
        (s.f_m_r, s.f_brk_r) = blending::serial_brake_repartition(fr, pt.rear_regen_capacity(d, v));
    }
    Ok(s)
}

fn replay(
    k: usize,
    f_v: f64,
    c: &ForceCommand,
    sa: &blending::SigmaAdherence,
    parked: bool,
    opts: &SimOptions,
    rec: &mut Recorder,
) -> Result<BlendState> {
    let s = BlendState {
        sigma: c.sigma,
        f_v_f: c.sigma * f_v,
        f_v_r: (1.0 - c.sigma) * f_v + c.f_tr_f,
        f_m_f: c.f_m_f,
        f_m_r: c.f_m_r,
        f_brk_f: c.f_brk_f,
        f_brk_r: c.f_brk_r,
        f_tr_f: c.f_tr_f,
        mu_r: 0.0,
    };
    let residual = s.balance_residual();
    if residual > opts.balance_tol {
        rec.push(k, ViolationKind::Balance { residual })?;
    }
    for (field, value, ok) in [
        ("F_brk_f", c.f_brk_f, c.f_brk_f <= opts.balance_tol),
        ("F_brk_r", c.f_brk_r, c.f_brk_r <= opts.balance_tol),
        ("F_tr_f", c.f_tr_f, c.f_tr_f >= -opts.balance_tol),
    ] {
        if !ok {
            rec.push(k, ViolationKind::Sign { field, value })?;
        }
    }
    if !parked && c.sigma > sa.raw + 1e-9 {
        rec.push(
            k,
            ViolationKind::FrontLock {
                sigma: c.sigma,
                sigma_a: sa.raw,
            },
        )?;
    }
    Ok(s)
}

/// Energy consumption for a constant requested split, capped at the
/// adherence split step by step.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub sigma: f64,
    pub e_c: f64,
    pub wh_per_km: f64,
    pub violations: usize,
}

pub fn sweep_sigma(pt: &Powertrain, design: &Design, cycle: &DrivingCycle, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let m = pt.mass(design)?.m_total;
    let p = &pt.vehicle;
    let caps: Vec<f64> = (0..cycle.len())
        .map(|k| {
            let f_v = vehicle::demand_force(p, m, cycle.v[k], cycle.a[k], cycle.theta[k]);
            blending::sigma_adherence(p, m, f_v, cycle.theta[k]).clamped
        })
        .collect();
    grid.iter()
        .map(|&sigma| {
            let trace: Vec<f64> = caps.iter().map(|c| sigma.min(*c)).collect();
            let r = run(pt, design, cycle, Policy::SigmaTrace(&trace), &SimOptions::default())?;
            Ok(SweepRow {
                sigma,
                e_c: r.e_c,
                wh_per_km: r.wh_per_km,
                violations: r.violations.len(),
            })
        })
        .collect()
}

/// Heuristic sizing used to start the optimiser: largest gear ratio, a rear
/// machine 20 % above what the performance targets and the adherence policy
/// need, and the battery the range requirement calls for.
pub fn heuristic_design(pt: &Powertrain, cycle: &DrivingCycle) -> Result<Design> {
    pt.check_cycle(cycle)?;
    let (_, gamma) = pt.gamma_bounds()?;
    let p = &pt.vehicle;
    let mut d = Design {
        gamma,
        s_m: 1.0,
        s_b: 1.0,
    };
    for _ in 0..100 {
        let m_rest = p.m_fixed() + pt.battery.mbar_b * d.s_b;
        let perf = performance::min_motor_scale(p, &pt.front, &pt.rear, m_rest, gamma);
        let m = m_rest + pt.rear.mbar_m * d.s_m;
        let mut peak: f64 = 0.0;
        for k in 0..cycle.len() {
            let (v, theta) = (cycle.v[k], cycle.theta[k]);
            let f_v = vehicle::demand_force(p, m, v, cycle.a[k], theta);
            if f_v <= 0.0 {
                continue;
            }
            let sigma = blending::sigma_adherence(p, m, f_v, theta).clamped;
            let (ff, fr) = blending::split_demand(f_v, sigma);
            let rear = fr + blending::saturation_transfer(ff, pt.front.force_capacity(v, p.r_wf));
            let by_torque = rear * p.r_wr / (pt.rear.t_max * gamma * p.eta_gb);
            let by_power = rear * v / (pt.rear.p_max * p.eta_gb);
            peak = peak.max(by_torque).max(by_power);
        }
        let s_m = 1.2 * perf.max(peak).max(1e-3);
        let trial = Design { s_m, ..d };
        let r = run(pt, &trial, cycle, Policy::Adherence, &SimOptions::default())?;
        let need = pt.battery.min_scale(r.e_c.max(0.0)) * p.d_r / cycle.length_m;
        let s_b = need.max(1e-3);
        let next = Design { gamma, s_m, s_b };
        let settled = (next.s_m - d.s_m).abs() <= 1e-13 * d.s_m && (next.s_b - d.s_b).abs() <= 1e-13 * d.s_b;
        d = next;
        if settled {
            break;
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::standard;
    use alloc::vec;
    use proptest::prelude::*;

    fn design() -> Design {
        Design {
            gamma: 5.0,
            s_m: 0.8,
            s_b: 1.0,
        }
    }

    #[test]
    fn parked_cycle_drains_auxiliaries_only() {
        let pt = Powertrain::reference();
        let c = DrivingCycle::new("idle", 1.0, vec![0.0; 30], None);
        // a cycle that never moves is rejected before simulation
        assert!(matches!(c, Err(Error::ZeroLength)));
        let mut v = vec![0.0; 30];
        v[29] = 0.5;
        let c = DrivingCycle::new("idle", 1.0, v, None).unwrap();
        let r = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
        let p = &pt.vehicle;
        let parked = 28.0 * p.p_aux / p.eta_b;
        let first28: f64 = r.steps[..28].iter().map(|s| s.p_b).sum();
        assert!((first28 - parked).abs() < 1e-9);
    }

    #[test]
    fn audit_closes() {
        let pt = Powertrain::reference();
        for c in [standard::ece15(), standard::sprint_brake(), standard::eudc()] {
            let r = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
            assert!((r.audit.total - r.e_c).abs() <= 1e-9 * r.e_c.abs(), "{}", c.name);
            for x in [
                r.audit.friction_brakes,
                r.audit.gearbox,
                r.audit.front_losses,
                r.audit.rear_losses,
                r.audit.inverter,
                r.audit.battery,
                r.audit.auxiliaries,
            ] {
                assert!(x >= 0.0);
            }
            for s in &r.steps {
                assert!(s.blend.balance_residual() <= 1e-9 * s.f_v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn energy_trace_matches_integration() {
        let pt = Powertrain::reference();
        let c = standard::ece15();
        let r = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
        let p_b: Vec<f64> = r.steps.iter().map(|s| s.p_b).collect();
        assert_eq!(r.e_b, battery::integrate(pt.battery.initial_energy(1.0), &p_b, c.dt));
        assert_eq!(r.e_b.len(), c.len() + 1);
    }

    #[test]
    fn replay_reproduces_policy() {
        let pt = Powertrain::reference();
        let c = standard::sprint_brake();
        let a = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
        let trace = a.force_trace();
        let b = run(&pt, &design(), &c, Policy::ForceTrace(&trace), &SimOptions::default()).unwrap();
        assert_eq!(a.e_c, b.e_c);
        let s = run(
            &pt,
            &design(),
            &c,
            Policy::SigmaTrace(&a.sigma_trace()),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(a.e_c, s.e_c);
    }

    #[test]
    fn deterministic() {
        let pt = Powertrain::reference();
        let c = standard::ece15();
        let a = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
        let b = run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strict_mode_stops_at_first_violation() {
        let pt = Powertrain::reference();
        let c = standard::sprint_brake();
        let tiny = Design {
            gamma: 2.0,
            s_m: 0.05,
            s_b: 1.0,
        };
        let r = run(&pt, &tiny, &c, Policy::Adherence, &SimOptions::default()).unwrap();
        assert!(!r.violations.is_empty());
        let first = r.violations[0].step;
        let e = run(
            &pt,
            &tiny,
            &c,
            Policy::Adherence,
            &SimOptions {
                strict: true,
                ..SimOptions::default()
            },
        );
        assert!(matches!(e, Err(Error::Violation { step, .. }) if step == first));
    }

    #[test]
    fn overspeed_rejected() {
        let pt = Powertrain::reference();
        let c = standard::constant_speed(80.0, 10.0, 1.0);
        assert!(matches!(
            run(&pt, &design(), &c, Policy::Adherence, &SimOptions::default()),
            Err(Error::OverSpeed { .. })
        ));
    }

    #[test]
    fn sweep_zero_is_rear_only() {
        let pt = Powertrain::reference();
        let c = standard::ece15();
        let rows = sweep_sigma(&pt, &design(), &c, &[0.0, 0.5]).unwrap();
        let rear_only = run(
            &pt,
            &design(),
            &c,
            Policy::SigmaTrace(&vec![0.0; c.len()]),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(rows[0].e_c, rear_only.e_c);
        assert!(rear_only
            .steps
            .iter()
            .all(|s| s.blend.f_m_f == 0.0 && s.blend.f_brk_f == 0.0));
    }

    #[test]
    fn identical_axles_are_symmetric() {
        let mut pt = Powertrain::reference();
        pt.vehicle.eta_gb = 1.0;
        pt.vehicle.r_wr = pt.vehicle.r_wf;
        pt.vehicle.v_max = 40.0;
        pt.rear.p_max = pt.front.p_max;
        pt.rear.t_max = pt.front.t_max;
        pt.rear.omega_max = pt.front.omega_max;
        pt.rear.loss = pt.front.loss;
        let d = Design {
            gamma: 1.0,
            s_m: 1.0,
            s_b: 1.0,
        };
        let c = standard::ece15();
        let e = |s: f64| {
            run(
                &pt,
                &d,
                &c,
                Policy::SigmaTrace(&vec![s; c.len()]),
                &SimOptions::default(),
            )
            .unwrap()
            .e_c
        };
        for s in [0.1, 0.3, 0.45] {
            assert!((e(s) - e(1.0 - s)).abs() <= 1e-9 * e(s), "{s}");
        }
        assert!(e(0.5) < e(0.3) && e(0.3) < e(0.1));
    }

    #[test]
    fn heuristic_design_meets_targets() {
        let pt = Powertrain::reference();
        let c = standard::ece15();
        let d = heuristic_design(&pt, &c).unwrap();
        let r = run(&pt, &d, &c, Policy::Adherence, &SimOptions::default()).unwrap();
        assert!(
            r.performance.margins().iter().all(|m| *m >= -1e-3),
            "{:?}",
            r.performance
        );
        assert!(r.violations.is_empty(), "{:?}", r.violations.first());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn heavier_rider_costs_more(extra in 1.0f64..60.0, s_m in 0.6f64..1.5, gamma in 2.0f64..5.4) {
            let mut pt = Powertrain::reference();
            let c = standard::ece15();
            let d = Design { gamma, s_m, s_b: 1.0 };
            let base = run(&pt, &d, &c, Policy::Adherence, &SimOptions::default()).unwrap().e_c;
            pt.vehicle.m_r += extra;
            let heavy = run(&pt, &d, &c, Policy::Adherence, &SimOptions::default()).unwrap().e_c;
            prop_assert!(heavy > base);
        }

        #[test]
        fn ledger_bounds(s_m in 0.6f64..1.5, gamma in 2.0f64..5.4, sigma in 0.0f64..1.0) {
            let pt = Powertrain::reference();
            let c = standard::sprint_brake();
            let d = Design { gamma, s_m, s_b: 1.0 };
            let rows = run(&pt, &d, &c, Policy::SigmaTrace(&vec![sigma; c.len()]), &SimOptions::default()).unwrap();
            let l = rows.ledger.unwrap();
            prop_assert!(l.zeta >= 0.0 && l.zeta <= 100.0);
            prop_assert!(l.eta_avg > 0.0 && l.eta_avg <= 100.0);
        }
    }
}
