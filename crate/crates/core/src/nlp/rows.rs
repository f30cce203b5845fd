//! Constraint rows of the transcription, each written once over [`Real`].
//!
//! Units inside the program: forces kN, powers kW, energies MJ.

use crate::blending;
use crate::machines;
use crate::num::Real;
use crate::performance;
use crate::simulate::Powertrain;
use crate::vehicle;

use super::layout::{Field, Scalar};

pub(crate) const KN: f64 = 1e3;
pub(crate) const KW: f64 = 1e3;
pub(crate) const MJ: f64 = 1e6;
/// Watt-hours per megajoule.
pub(crate) const WH_PER_MJ: f64 = MJ / 3600.0;

/// How the pinned split is obtained from the adherence split in the
/// restricted problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SigmaBranch {
    Raw,
    Zero,
    One,
}

impl SigmaBranch {
    pub fn of(raw: f64) -> Self {
        if raw < 0.0 {
            SigmaBranch::Zero
        } else if raw > 1.0 {
            SigmaBranch::One
        } else {
            SigmaBranch::Raw
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct StepData {
    pub v: f64,
    pub a: f64,
    pub theta: f64,
    pub parked: bool,
    /// Front motor force capacity, kN.
    pub cap_f: f64,
}

pub(crate) struct Ctx {
    pub pt: Powertrain,
    pub steps: alloc::vec::Vec<StepData>,
    pub dt: f64,
    /// Complementarity relaxation, N² and W².
    pub eps_c: f64,
    pub ebar: f64,
    pub d_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Var {
    F(Field),
    PrevEb,
    G(Scalar),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowKind {
    FrontBalance,
    SumBalance,
    AcPower,
    Battery,
    Euler { first: bool },
    FrontLock,
    SigmaPinned(SigmaBranch),
    RearAdherence,
    RearPowerPos,
    RearPowerNeg,
    RearTorquePos,
    RearTorqueNeg,
    CoherenceAxles,
    CoherenceFront,
    CoherenceRear,
    ComplForce,
    ComplAc,
    ComplBattery,
    SocLow,
    SocHigh,
    Accel,
    TopSpeed,
    PowerGrade,
    TorqueGrade,
    Range,
}

/// Local values of every quantity a row may read; unread ones stay zero.
pub(crate) struct V<T> {
    pub sigma: T,
    pub fmf: T,
    pub frp: T,
    pub frn: T,
    pub fbf: T,
    pub fbr: T,
    pub ftr: T,
    pub pacp: T,
    pub pacn: T,
    pub pbp: T,
    pub pbn: T,
    pub eb: T,
    pub eb_prev: T,
    pub gamma: T,
    pub sm: T,
    pub sb: T,
}

impl<T: Real> V<T> {
    pub fn zero() -> Self {
        let z = T::cst(0.0);
        Self {
            sigma: z,
            fmf: z,
            frp: z,
            frn: z,
            fbf: z,
            fbr: z,
            ftr: z,
            pacp: z,
            pacn: z,
            pbp: z,
            pbn: z,
            eb: z,
            eb_prev: z,
            gamma: z,
            sm: z,
            sb: z,
        }
    }

    pub fn set(&mut self, var: Var, value: T) {
        let slot = match var {
            Var::F(Field::Sigma) => &mut self.sigma,
            Var::F(Field::FmF) => &mut self.fmf,
            Var::F(Field::FrPos) => &mut self.frp,
            Var::F(Field::FrNeg) => &mut self.frn,
            Var::F(Field::FbrkF) => &mut self.fbf,
            Var::F(Field::FbrkR) => &mut self.fbr,
            Var::F(Field::FtrF) => &mut self.ftr,
            Var::F(Field::PacPos) => &mut self.pacp,
            Var::F(Field::PacNeg) => &mut self.pacn,
            Var::F(Field::PbPos) => &mut self.pbp,
            Var::F(Field::PbNeg) => &mut self.pbn,
            Var::F(Field::Eb) => &mut self.eb,
            Var::PrevEb => &mut self.eb_prev,
            Var::G(Scalar::Gamma) => &mut self.gamma,
            Var::G(Scalar::Sm) => &mut self.sm,
            Var::G(Scalar::Sb) => &mut self.sb,
        };
        *slot = value;
    }
}

use Field::*;
use Scalar::*;

const FRONT: &[Var] = &[
    Var::F(Sigma),
    Var::F(FmF),
    Var::F(FbrkF),
    Var::F(FtrF),
    Var::G(Sm),
    Var::G(Sb),
];
const SUM: &[Var] = &[
    Var::F(FmF),
    Var::F(FbrkF),
    Var::F(FrPos),
    Var::F(FrNeg),
    Var::F(FbrkR),
    Var::G(Sm),
    Var::G(Sb),
];
const AC: &[Var] = &[
    Var::F(FmF),
    Var::F(FrPos),
    Var::F(FrNeg),
    Var::F(PacPos),
    Var::F(PacNeg),
    Var::G(Gamma),
    Var::G(Sm),
];
const BATTERY: &[Var] = &[Var::F(PbPos), Var::F(PbNeg), Var::F(PacPos), Var::F(PacNeg)];
const EULER_FIRST: &[Var] = &[Var::F(Eb), Var::F(PbPos), Var::F(PbNeg), Var::G(Sb)];
const EULER: &[Var] = &[Var::F(Eb), Var::PrevEb, Var::F(PbPos), Var::F(PbNeg)];
const SIGMA: &[Var] = &[Var::F(Sigma), Var::G(Sm), Var::G(Sb)];
const SIGMA_CONST: &[Var] = &[Var::F(Sigma)];
const ADHERENCE: &[Var] = SUM;
const POWER_POS: &[Var] = &[Var::F(FrPos), Var::G(Sm)];
const POWER_NEG: &[Var] = &[Var::F(FrNeg), Var::G(Sm)];
const TORQUE_POS: &[Var] = &[Var::F(FrPos), Var::G(Sm), Var::G(Gamma)];
const TORQUE_NEG: &[Var] = &[Var::F(FrNeg), Var::G(Sm), Var::G(Gamma)];
const COH_AXLES: &[Var] = &[Var::F(FmF), Var::F(FrPos), Var::F(FrNeg)];
const COH_FRONT: &[Var] = &[Var::F(FmF), Var::F(FbrkF)];
const COH_REAR: &[Var] = &[Var::F(FrPos), Var::F(FrNeg), Var::F(FbrkR)];
const COMPL_F: &[Var] = &[Var::F(FrPos), Var::F(FrNeg)];
const COMPL_AC: &[Var] = &[Var::F(PacPos), Var::F(PacNeg)];
const COMPL_B: &[Var] = &[Var::F(PbPos), Var::F(PbNeg)];
const SOC: &[Var] = &[Var::F(Eb), Var::G(Sb)];
const GAMMA_SM_SB: &[Var] = &[Var::G(Gamma), Var::G(Sm), Var::G(Sb)];
const SM_SB: &[Var] = &[Var::G(Sm), Var::G(Sb)];

pub(crate) const INF: f64 = f64::INFINITY;

impl RowKind {
    pub(crate) fn vars(self) -> &'static [Var] {
        use RowKind::*;
        match self {
            FrontBalance => FRONT,
            SumBalance => SUM,
            AcPower => AC,
            Battery => BATTERY,
            Euler { first: true } => EULER_FIRST,
            Euler { first: false } => EULER,
            FrontLock | SigmaPinned(SigmaBranch::Raw) => SIGMA,
            SigmaPinned(_) => SIGMA_CONST,
            RearAdherence => ADHERENCE,
            RearPowerPos => POWER_POS,
            RearPowerNeg => POWER_NEG,
            RearTorquePos => TORQUE_POS,
            RearTorqueNeg => TORQUE_NEG,
            CoherenceAxles => COH_AXLES,
            CoherenceFront => COH_FRONT,
            CoherenceRear => COH_REAR,
            ComplForce => COMPL_F,
            ComplAc => COMPL_AC,
            ComplBattery => COMPL_B,
            SocLow | SocHigh => SOC,
            Accel | TorqueGrade => GAMMA_SM_SB,
            TopSpeed | PowerGrade => SM_SB,
            Range => SOC,
        }
    }

    pub fn label(self) -> &'static str {
        use RowKind::*;
        match self {
            FrontBalance => "front force balance",
            SumBalance => "total force balance",
            AcPower => "AC power balance",
            Battery => "battery power balance",
            Euler { .. } => "energy update",
            FrontLock => "front lock (sigma <= adherence split)",
            SigmaPinned(_) => "pinned adherence split",
            RearAdherence => "rear adherence",
            RearPowerPos => "rear power limit (traction)",
            RearPowerNeg => "rear power limit (regeneration)",
            RearTorquePos => "rear torque limit (traction)",
            RearTorqueNeg => "rear torque limit (regeneration)",
            CoherenceAxles => "coherence front/rear motors",
            CoherenceFront => "coherence front motor/brake",
            CoherenceRear => "coherence rear motor/brake",
            ComplForce => "complementarity rear force split",
            ComplAc => "complementarity AC power split",
            ComplBattery => "complementarity battery power split",
            SocLow => "minimum state of charge",
            SocHigh => "maximum state of charge",
            Accel => "acceleration time",
            TopSpeed => "top speed",
            PowerGrade => "power gradeability",
            TorqueGrade => "torque gradeability",
            Range => "range",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(
            self,
            RowKind::Accel | RowKind::TopSpeed | RowKind::PowerGrade | RowKind::TorqueGrade | RowKind::Range
        )
    }

    pub(crate) fn bounds(self, ctx: &Ctx) -> (f64, f64) {
        use RowKind::*;
        match self {
            FrontBalance | SumBalance | AcPower | Battery | Euler { .. } | SigmaPinned(_) => (0.0, 0.0),
            ComplForce | ComplAc | ComplBattery => (-INF, ctx.eps_c),
            _ => (0.0, INF),
        }
    }

    pub(crate) fn eval<T: Real>(self, ctx: &Ctx, step: usize, x: &V<T>) -> T {
        use RowKind::*;
        let pt = &ctx.pt;
        let p = &pt.vehicle;
        let s = &ctx.steps[step];
        let mass = || vehicle::mass(p, pt.battery.mbar_b, pt.rear.mbar_m, x.sb, x.sm);
        let demand = |m: T| vehicle::demand_force(p, m, s.v, s.a, s.theta);
        let eta = p.eta_gb;
        match self {
            FrontBalance => x.sigma * demand(mass()) / KN - x.fmf - x.fbf - x.ftr,
            SumBalance => demand(mass()) / KN - x.fmf - x.fbf - x.frp + x.frn - x.fbr,
            AcPower => {
                let rear_wheel = x.frp / eta - x.frn * eta;
                let mech = (x.fmf + rear_wheel) * s.v;
                let losses = if s.parked {
                    T::cst(0.0)
                } else {
                    let omega_f = machines::front_speed(s.v, p.r_wf);
                    let front = pt.front.losses(T::cst(omega_f), x.fmf * (KN * p.r_wf)).total();
                    let omega_r = machines::rear_speed(s.v, x.gamma, p.r_wr);
                    let torque = rear_wheel * (KN * p.r_wr) / x.gamma;
                    let rear = pt.rear.losses(x.sm, omega_r, torque).total();
                    (front + rear) / KW
                };
                x.pacp - x.pacn - mech - losses
            }
            Battery => x.pbp * p.eta_b - x.pbn / p.eta_b - (x.pacp / p.eta_inv - x.pacn * p.eta_inv) - p.p_aux / KW,
            Euler { first } => {
                let prev = if first {
                    x.sb * (pt.battery.xi_max * ctx.ebar)
                } else {
                    x.eb_prev
                };
                x.eb - prev + (x.pbp - x.pbn) * (ctx.dt / 1e3)
            }
            FrontLock => {
                let m = mass();
                blending::sigma_adherence_raw(p, m, demand(m), s.theta) - x.sigma
            }
            SigmaPinned(branch) => match branch {
                SigmaBranch::Raw => {
                    let m = mass();
                    x.sigma - blending::sigma_adherence_raw(p, m, demand(m), s.theta)
                }
                SigmaBranch::Zero => x.sigma,
                SigmaBranch::One => x.sigma - 1.0,
            },
            RearAdherence => {
                let x_f = x.fmf + x.fbf;
                let x_r = x.frp - x.frn + x.fbr;
                let load = blending::rear_load(p, mass(), (x_f + x_r) * KN, s.theta) / KN;
                x_r - load * p.mu_brk_peak_r
            }
            RearPowerPos => x.sm * (pt.rear.p_max / KW) - x.frp * (s.v / eta),
            RearPowerNeg => x.sm * (pt.rear.p_max / KW) - x.frn * (s.v * eta),
            RearTorquePos => x.sm * x.gamma * (pt.rear.t_max / KN) - x.frp * (p.r_wr / eta),
            RearTorqueNeg => x.sm * x.gamma * (pt.rear.t_max / KN) - x.frn * (p.r_wr * eta),
            CoherenceAxles => x.fmf * (x.frp - x.frn),
            CoherenceFront => x.fmf * x.fbf,
            CoherenceRear => (x.frp - x.frn) * x.fbr,
            ComplForce => x.frp * x.frn * (KN * KN),
            ComplAc => x.pacp * x.pacn * (KW * KW),
            ComplBattery => x.pbp * x.pbn * (KW * KW),
            SocLow => x.eb - x.sb * (pt.battery.xi_min * ctx.ebar),
            SocHigh => x.sb * (pt.battery.xi_max * ctx.ebar) - x.eb,
            Accel => performance::accel_margin(p, &pt.front, &pt.rear, mass(), x.sm, x.gamma),
            TopSpeed => performance::top_speed_margin(p, &pt.front, &pt.rear, mass(), x.sm) / KW,
            PowerGrade => performance::power_grade_margin(p, &pt.front, &pt.rear, mass(), x.sm) / KW,
            TorqueGrade => performance::torque_grade_margin(p, &pt.front, &pt.rear, mass(), x.sm, x.gamma) / KN,
            Range => {
                let e_c = x.sb * (pt.battery.xi_max * ctx.ebar) - x.eb;
                performance::range_margin(p, ctx.ebar, x.sb, e_c, ctx.d_c)
            }
        }
    }
}
