//! Regenerative ratio and average efficiency over a cycle.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyLedger {
    /// Mechanical traction energy at the wheels, J (≥ 0).
    pub e_v_tr: f64,
    /// Mechanical braking energy at the wheels, J (≤ 0).
    pub e_v_brk: f64,
    /// Energy drawn from the battery, J (≥ 0).
    pub e_b_out: f64,
    /// Energy returned to the battery, J (≤ 0).
    pub e_b_in: f64,
    /// Regenerative ratio, %.
    pub zeta: f64,
    /// Average efficiency, %.
    pub eta_avg: f64,
}

#[derive(Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn get(&self) -> f64 {
        self.s + self.c
    }
}

pub fn ledger(p_v: &[f64], p_b: &[f64], dt: f64) -> Result<EnergyLedger> {
    if p_v.len() != p_b.len() {
        return Err(Error::LengthMismatch("P_v and P_b"));
    }
    let (mut tr, mut brk, mut out, mut inn) = (Sum::default(), Sum::default(), Sum::default(), Sum::default());
    for (&v, &b) in p_v.iter().zip(p_b) {
        if v >= 0.0 {
            tr.add(v);
        } else {
            brk.add(v);
        }
        if b >= 0.0 {
            out.add(b);
        } else {
            inn.add(b);
        }
    }
    let e_v_tr = tr.get() * dt;
    let e_v_brk = brk.get() * dt;
    let e_b_out = out.get() * dt;
    let e_b_in = inn.get() * dt;
    if !(e_b_out > 0.0) {
        return Err(Error::UndefinedMetric("no energy drawn from the battery"));
    }
    Ok(EnergyLedger {
        e_v_tr,
        e_v_brk,
        e_b_out,
        e_b_in,
        zeta: 100.0 * e_b_in.abs() / e_b_out,
        eta_avg: 100.0 * (e_v_tr + e_v_brk) / (e_b_out + e_b_in),
    })
}

impl EnergyLedger {
    /// Average efficiency from the regenerative ratio,
    /// `100·(E_v,tr + E_v,brk) / (E_b,out·(1 − ζ/100))`.
    pub fn eta_from_zeta(&self) -> f64 {
        100.0 * (self.e_v_tr + self.e_v_brk) / (self.e_b_out * (1.0 - self.zeta / 100.0))
    }

    /// Net battery energy, J.
    pub fn net_battery(&self) -> f64 {
        self.e_b_out + self.e_b_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn no_braking() {
        let l = ledger(&[100.0, 200.0], &[150.0, 260.0], 1.0).unwrap();
        assert_eq!(l.zeta, 0.0);
        assert_eq!(l.e_v_brk, 0.0);
        assert!((l.eta_avg - 100.0 * 300.0 / 410.0).abs() < 1e-12);
    }

    #[test]
    fn lossless_chain() {
        let p = [500.0, 1000.0, -300.0, -700.0, 200.0];
        let l = ledger(&p, &p, 0.5).unwrap();
        assert!((l.eta_avg - 100.0).abs() < 1e-12);
        assert!((l.zeta - 100.0 * 1000.0 / 1700.0).abs() < 1e-12);
    }

    #[test]
    fn hand_ledger() {
        let l = ledger(&[1000.0, -500.0], &[1200.0, -300.0], 2.0).unwrap();
        assert_eq!(
            (l.e_v_tr, l.e_v_brk, l.e_b_out, l.e_b_in),
            (2000.0, -1000.0, 2400.0, -600.0)
        );
        assert!((l.zeta - 25.0).abs() < 1e-12);
        assert!((l.eta_avg - 100.0 * 1000.0 / 1800.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_without_draw() {
        assert!(matches!(
            ledger(&[0.0, -1.0], &[0.0, -1.0], 1.0),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            ledger(&[0.0], &[0.0, 1.0], 1.0),
            Err(Error::LengthMismatch(_))
        ));
    }

    proptest! {
        #[test]
        fn bounds_on_lossy_trajectories(
            data in proptest::collection::vec((-3e4f64..5e4, 0.0f64..0.3, 0.0f64..500.0), 2..200),
            dt in 0.2f64..2.0,
        ) {
            // battery power from wheel power through a lossy chain: traction
            // costs more, regeneration returns less
            let p_v: Vec<f64> = data.iter().map(|d| d.0).collect();
            let p_b: Vec<f64> = data
                .iter()
                .map(|&(v, loss, aux)| if v >= 0.0 { v * (1.0 + loss) + aux } else { v * (1.0 - loss) + aux })
                .collect();
            prop_assume!(p_v.iter().any(|v| *v > 1.0));
            let l = ledger(&p_v, &p_b, dt).unwrap();
            // rest-to-rest cycles end with non-negative net wheel energy
            prop_assume!(l.e_v_tr + l.e_v_brk > 0.0);
            prop_assert!(l.zeta >= 0.0 && l.zeta <= 100.0);
            prop_assert!(l.eta_avg > 0.0 && l.eta_avg <= 100.0 + 1e-9);
            prop_assert!((l.eta_from_zeta() - l.eta_avg).abs() <= 1e-12 * l.eta_avg.abs());
        }
    }
}
