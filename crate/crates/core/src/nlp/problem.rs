use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cycle::DrivingCycle;
use crate::error::{Error, Result};
use crate::num::{Dual, Dual2, Real};
use crate::simulate::{Powertrain, GAMMA_MIN};
use crate::solver::NlpProblem;
use crate::vehicle;

use super::layout::{Field, Layout, Scalar, Slot};
use super::rows::{Ctx, RowKind, SigmaBranch, StepData, Var, INF, KN, MJ, V, WH_PER_MJ};

/// Local variables per row, the width of the AD types.
const K: usize = 8;

pub const SCALE_MIN: f64 = 1e-3;
pub const SCALE_MAX: f64 = 100.0;

/// Treatment of the front share in the transcription.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitMode {
    /// σ free within `[0, σᵃ]`.
    Free,
    /// σ pinned to the adherence split, clamped per the given branches.
    Pinned(Vec<SigmaBranch>),
}

struct Row {
    kind: RowKind,
    step: usize,
    cols: [usize; K],
    len: usize,
    jac_at: usize,
    /// `(local a, local b, hessian slot)` with `a >= b` in global order.
    hess: Vec<(u8, u8, usize)>,
}

/// Direct transcription of the co-design problem over one cycle.
/// Hessian entry of one row: local indices and global position.
type HessEntry = (u8, u8, (usize, usize));

pub struct Transcription {
    pub(crate) ctx: Ctx,
    layout: Layout,
    rows: Vec<Row>,
    nnz_jac: usize,
    hess_structure: Vec<(usize, usize)>,
    x_lower: Vec<f64>,
    x_upper: Vec<f64>,
    grad: Vec<f64>,
    start: Vec<f64>,
}

impl Transcription {
    /// Builds the program. `start` is the initial point in scaled units.
    pub fn new(pt: &Powertrain, cycle: &DrivingCycle, mode: &SplitMode, eps_c: f64, start: Vec<f64>) -> Result<Self> {
        pt.validate()?;
        pt.check_cycle(cycle)?;
        let (_, gamma_ub) = pt.gamma_bounds()?;
        if !(eps_c >= 0.0 && eps_c.is_finite()) {
            return Err(Error::Domain {
                what: "eps_c",
                value: eps_c,
            });
        }
        let n = cycle.len();
        if let SplitMode::Pinned(b) = mode {
            if b.len() != n {
                return Err(Error::LengthMismatch("sigma branches and cycle"));
            }
        }
        let layout = Layout::new(n);
        if start.len() != layout.len() {
            return Err(Error::LengthMismatch("initial point and layout"));
        }
        let p = &pt.vehicle;
        let steps: Vec<StepData> = (0..n)
            .map(|k| {
                let (v, a) = (cycle.v[k], cycle.a[k]);
                StepData {
                    v,
                    a,
                    theta: cycle.theta[k],
                    parked: vehicle::is_parked(v, a),
                    cap_f: pt.front.force_capacity(v, p.r_wf) / KN,
                }
            })
            .collect();
        let ctx = Ctx {
            pt: pt.clone(),
            steps,
            dt: cycle.dt,
            eps_c,
            ebar: pt.battery.ebar_max / MJ,
            d_c: cycle.length_m,
        };

        let mut x_lower = alloc::vec![-INF; layout.len()];
        let mut x_upper = alloc::vec![INF; layout.len()];
        x_lower[layout.scalar(Scalar::Gamma)] = GAMMA_MIN;
        x_upper[layout.scalar(Scalar::Gamma)] = gamma_ub;
        for s in [Scalar::Sm, Scalar::Sb] {
            x_lower[layout.scalar(s)] = SCALE_MIN;
            x_upper[layout.scalar(s)] = SCALE_MAX;
        }
        for (k, s) in ctx.steps.iter().enumerate() {
            for f in Field::ALL {
                let (lo, hi) = match f {
                    Field::Sigma => (0.0, 1.0),
                    Field::FmF => (-s.cap_f, s.cap_f),
                    Field::FbrkF | Field::FbrkR => (-INF, 0.0),
                    _ => (0.0, INF),
                };
                let i = layout.field(k, f);
                x_lower[i] = lo;
                x_upper[i] = hi;
            }
        }

        let mut grad = alloc::vec![0.0; layout.len()];
        grad[layout.scalar(Scalar::Sb)] = pt.battery.xi_max * ctx.ebar * WH_PER_MJ;
        grad[layout.field(n - 1, Field::Eb)] = -WH_PER_MJ;
        for k in 0..n {
            grad[layout.field(k, Field::FtrF)] = p.w_obj;
        }

        let mut kinds: Vec<(RowKind, usize)> = Vec::with_capacity(19 * n + 5);
        for k in 0..n {
            let sigma_row = match mode {
                SplitMode::Free => RowKind::FrontLock,
                SplitMode::Pinned(b) => RowKind::SigmaPinned(b[k]),
            };
            kinds.extend(
                [
                    RowKind::FrontBalance,
                    RowKind::SumBalance,
                    RowKind::AcPower,
                    RowKind::Battery,
                    RowKind::Euler { first: k == 0 },
                    sigma_row,
                    RowKind::RearAdherence,
                    RowKind::RearPowerPos,
                    RowKind::RearPowerNeg,
                    RowKind::RearTorquePos,
                    RowKind::RearTorqueNeg,
                    RowKind::CoherenceAxles,
                    RowKind::CoherenceFront,
                    RowKind::CoherenceRear,
                    RowKind::ComplForce,
                    RowKind::ComplAc,
                    RowKind::ComplBattery,
                    RowKind::SocLow,
                    RowKind::SocHigh,
                ]
                .into_iter()
                .map(|r| (r, k)),
            );
        }
        for g in [
            RowKind::Accel,
            RowKind::TopSpeed,
            RowKind::PowerGrade,
            RowKind::TorqueGrade,
            RowKind::Range,
        ] {
            kinds.push((g, n - 1));
        }

        let mut rows = Vec::with_capacity(kinds.len());
        let mut nnz_jac = 0;
        let mut hess_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut pending: Vec<Vec<HessEntry>> = Vec::with_capacity(kinds.len());
        for (kind, step) in kinds {
            let vars = kind.vars();
            let mut cols = [0; K];
            for (c, v) in cols.iter_mut().zip(vars) {
                *c = match *v {
                    Var::F(f) => layout.field(step, f),
                    Var::PrevEb => layout.field(step - 1, Field::Eb),
                    Var::G(s) => layout.scalar(s),
                };
            }
            let len = vars.len();
            let mut h = Vec::new();
            if !is_linear(kind) {
                for a in 0..len {
                    for b in 0..=a {
                        let (i, j) = (cols[a].max(cols[b]), cols[a].min(cols[b]));
                        let next = hess_index.len();
                        hess_index.entry((i, j)).or_insert(next);
                        h.push((a as u8, b as u8, (i, j)));
                    }
                }
            }
            pending.push(h);
            rows.push(Row {
                kind,
                step,
                cols,
                len,
                jac_at: nnz_jac,
                hess: Vec::new(),
            });
            nnz_jac += len;
        }
        let mut hess_structure = alloc::vec![(0, 0); hess_index.len()];
        for (&pos, &slot) in &hess_index {
            hess_structure[slot] = pos;
        }
        for (row, h) in rows.iter_mut().zip(pending) {
            row.hess = h.into_iter().map(|(a, b, pos)| (a, b, hess_index[&pos])).collect();
        }

        Ok(Self {
            ctx,
            layout,
            rows,
            nnz_jac,
            hess_structure,
            x_lower,
            x_upper,
            grad,
            start,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn row_kinds(&self) -> impl Iterator<Item = (RowKind, usize)> + '_ {
        self.rows.iter().map(|r| (r.kind, r.step))
    }

    fn local<T: Real>(&self, row: &Row, x: &[f64], seed: impl Fn(f64, usize) -> T) -> V<T> {
        let mut v = V::zero();
        for (slot, (var, &col)) in row.kind.vars().iter().zip(&row.cols).enumerate() {
            v.set(*var, seed(x[col], slot));
        }
        v
    }

    fn value(&self, row: &Row, x: &[f64]) -> f64 {
        let v = self.local(row, x, |x, _| x);
        row.kind.eval(&self.ctx, row.step, &v)
    }

    /// Stored energy drawn over the cycle at `x`, J.
    pub fn consumed_energy(&self, x: &[f64]) -> f64 {
        let sb = x[self.layout.scalar(Scalar::Sb)];
        let last = x[self.layout.field(self.layout.steps - 1, Field::Eb)];
        (self.ctx.pt.battery.xi_max * self.ctx.ebar * sb - last) * MJ
    }

    /// Largest `a·b` over the three complementarity pairs, in N² and W².
    pub fn max_complementarity(&self, x: &[f64]) -> f64 {
        let l = &self.layout;
        let mut worst: f64 = 0.0;
        for k in 0..l.steps {
            for (a, b) in [
                (Field::FrPos, Field::FrNeg),
                (Field::PacPos, Field::PacNeg),
                (Field::PbPos, Field::PbNeg),
            ] {
                worst = worst.max(x[l.field(k, a)] * x[l.field(k, b)] * KN * KN);
            }
        }
        worst
    }
}

fn is_linear(kind: RowKind) -> bool {
    use RowKind::*;
    matches!(
        kind,
        SumBalance
            | Battery
            | Euler { .. }
            | SigmaPinned(SigmaBranch::Zero)
            | SigmaPinned(SigmaBranch::One)
            | RearAdherence
            | RearPowerPos
            | RearPowerNeg
            | SocLow
            | SocHigh
            | TopSpeed
            | PowerGrade
            | Range
    )
}

impl NlpProblem for Transcription {
    fn num_variables(&self) -> usize {
        self.layout.len()
    }

    fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    fn variable_bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        lower.copy_from_slice(&self.x_lower);
        upper.copy_from_slice(&self.x_upper);
    }

    fn constraint_bounds(&self, lower: &mut [f64], upper: &mut [f64]) {
        for (i, r) in self.rows.iter().enumerate() {
            (lower[i], upper[i]) = r.kind.bounds(&self.ctx);
        }
    }

    fn initial_point(&self, x: &mut [f64]) {
        x.copy_from_slice(&self.start);
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut j = (self.ctx.pt.battery.xi_max * self.ctx.ebar * x[self.layout.scalar(Scalar::Sb)]
            - x[self.layout.field(self.layout.steps - 1, Field::Eb)])
            * WH_PER_MJ;
        let w = self.ctx.pt.vehicle.w_obj;
        for k in 0..self.layout.steps {
            j += w * x[self.layout.field(k, Field::FtrF)];
        }
        j
    }

    fn objective_gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(&self.grad);
    }

    fn constraints(&self, x: &[f64], g: &mut [f64]) {
        for (gi, r) in g.iter_mut().zip(&self.rows) {
            *gi = self.value(r, x);
        }
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        let mut s = Vec::with_capacity(self.nnz_jac);
        for (i, r) in self.rows.iter().enumerate() {
            s.extend(r.cols[..r.len].iter().map(|&c| (i, c)));
        }
        s
    }

    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) {
        for r in &self.rows {
            let v = self.local(r, x, Dual::<K>::var);
            let d = r.kind.eval(&self.ctx, r.step, &v);
            values[r.jac_at..r.jac_at + r.len].copy_from_slice(&d.g[..r.len]);
        }
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_structure.clone()
    }

    fn hessian_values(&self, x: &[f64], _obj_factor: f64, lambda: &[f64], values: &mut [f64]) {
        values.iter_mut().for_each(|v| *v = 0.0);
        for (r, &l) in self.rows.iter().zip(lambda) {
            if r.hess.is_empty() || l == 0.0 {
                continue;
            }
            let v = self.local(r, x, Dual2::<K>::var);
            let d = r.kind.eval(&self.ctx, r.step, &v);
            for &(a, b, slot) in &r.hess {
                values[slot] += l * d.h[a as usize][b as usize];
            }
        }
    }

    fn elimination_keys(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        let tail = 4 * self.layout.steps as u64 + 8;
        let vars = (0..self.layout.len())
            .map(|i| match self.layout.locate(i) {
                Slot::Scalar(_) => tail,
                Slot::Field(k, Field::Eb) => 4 * k as u64 + 2,
                Slot::Field(k, _) => 4 * k as u64,
            })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|r| {
                if r.kind.is_global() {
                    tail + 1
                } else {
                    4 * r.step as u64 + 1
                }
            })
            .collect();
        Some((vars, rows))
    }

    fn constraint_label(&self, i: usize) -> String {
        let r = &self.rows[i];
        if r.kind.is_global() {
            r.kind.label().into()
        } else {
            format!("step {}: {}", r.step, r.kind.label())
        }
    }

    fn variable_label(&self, i: usize) -> String {
        match self.layout.locate(i) {
            Slot::Scalar(s) => s.name().into(),
            Slot::Field(k, f) => format!("step {k}: {}", f.name()),
        }
    }
}
