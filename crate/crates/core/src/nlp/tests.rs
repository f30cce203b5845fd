use super::*;
use crate::cycle::standard;
use crate::performance;
use crate::solver::{check_jacobian, InteriorPoint};
use alloc::vec;

fn pt() -> Powertrain {
    Powertrain::reference()
}

fn start(pt: &Powertrain, cycle: &DrivingCycle) -> Vec<f64> {
    let d = simulate::heuristic_design(pt, cycle).unwrap();
    let sim = simulate::run(pt, &d, cycle, Policy::Adherence, &SimOptions::default()).unwrap();
    initial_point(&Layout::new(cycle.len()), &sim)
}

fn build(pt: &Powertrain, cycle: &DrivingCycle, free: bool) -> Transcription {
    let x0 = start(pt, cycle);
    let mode = if free {
        SplitMode::Free
    } else {
        let d = design_of(&Layout::new(cycle.len()), &x0);
        SplitMode::Pinned(sigma_branches(pt, &d, cycle).unwrap())
    };
    Transcription::new(pt, cycle, &mode, 1e-3, x0).unwrap()
}

fn bounds(p: &Transcription) -> (Vec<f64>, Vec<f64>) {
    let m = p.num_constraints();
    let (mut lo, mut hi) = (vec![0.0; m], vec![0.0; m]);
    p.constraint_bounds(&mut lo, &mut hi);
    (lo, hi)
}

fn short_cycle() -> DrivingCycle {
    DrivingCycle::new("short", 1.0, vec![0.0, 3.0, 7.0, 10.0, 8.0, 4.0, 0.0], None).unwrap()
}

#[test]
fn three_step_enumeration() {
    let pt = pt();
    let c = DrivingCycle::new("three", 1.0, vec![0.0, 2.0, 0.0], None).unwrap();
    for free in [true, false] {
        let p = build(&pt, &c, free);
        assert_eq!(p.num_variables(), 3 + 3 * 12);
        assert_eq!(p.num_constraints(), 3 * 19 + 5);
        let (lo, hi) = bounds(&p);
        let eq = lo.iter().zip(&hi).filter(|(l, h)| l == h).count();
        // per step: two balances, AC power, battery power, energy update,
        // plus the pinned split in the restricted problem
        assert_eq!(eq, if free { 3 * 5 } else { 3 * 6 });
        assert_eq!(p.num_constraints() - eq, if free { 3 * 14 + 5 } else { 3 * 13 + 5 });
        let labels: Vec<_> = (0..p.num_constraints()).map(|i| p.constraint_label(i)).collect();
        assert_eq!(labels[0], "step 0: front force balance");
        assert_eq!(labels[4], "step 0: energy update");
        assert_eq!(labels[19 + 6], "step 1: rear adherence");
        assert_eq!(labels[57], "acceleration time");
        assert_eq!(labels[61], "range");
    }
}

#[test]
fn sparsity_is_well_formed() {
    let p = build(&pt(), &short_cycle(), true);
    let mut jac = p.jacobian_structure();
    let nnz = jac.len();
    jac.sort_unstable();
    jac.dedup();
    assert_eq!(jac.len(), nnz);
    let hess = p.hessian_structure();
    assert!(hess.iter().all(|&(r, c)| r >= c && r < p.num_variables()));
    let mut h = hess.clone();
    h.sort_unstable();
    h.dedup();
    assert_eq!(h.len(), hess.len());
    let (vars, rows) = p.elimination_keys().unwrap();
    assert_eq!((vars.len(), rows.len()), (p.num_variables(), p.num_constraints()));
}

#[test]
fn heuristic_start_is_feasible() {
    let pt = pt();
    for c in [standard::ece15(), standard::sprint_brake()] {
        for free in [true, false] {
            let p = build(&pt, &c, free);
            let mut x = vec![0.0; p.num_variables()];
            p.initial_point(&mut x);
            let worst = worst_row(&p, &x).map_or(0.0, |w| w.1);
            assert!(worst < 1e-12, "{:?}", worst_row(&p, &x));
            assert!(p.objective(&x).is_finite());
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let pt = pt();
    let c = standard::ece15();
    for free in [true, false] {
        let p = build(&pt, &c, free);
        let mut x = vec![0.0; p.num_variables()];
        p.initial_point(&mut x);
        let r = check_jacobian(&p, &x, 100, 11);
        assert_eq!(r.columns.len(), 100);
        assert!(r.max_rel_error() <= 1e-6, "{:?}", r.worst);
    }
}

#[test]
fn hessian_matches_differenced_jacobian() {
    let pt = pt();
    let c = short_cycle();
    let p = build(&pt, &c, true);
    let (n, m) = (p.num_variables(), p.num_constraints());
    let mut x = vec![0.0; n];
    p.initial_point(&mut x);
    // move off the bounds so every product term is exercised
    for xi in x.iter_mut().skip(SCALARS) {
        *xi += 0.05;
    }
    let lambda: Vec<f64> = (0..m).map(|i| 1.0 + (i % 7) as f64 * 0.25).collect();
    let js = p.jacobian_structure();
    let hs = p.hessian_structure();
    let mut hv = vec![0.0; hs.len()];
    p.hessian_values(&x, 1.0, &lambda, &mut hv);
    let mut dense = vec![vec![0.0; n]; n];
    for (&(r, c), &v) in hs.iter().zip(&hv) {
        dense[r][c] += v;
        if r != c {
            dense[c][r] += v;
        }
    }
    let weighted_grad = |x: &[f64]| {
        let mut jv = vec![0.0; js.len()];
        p.jacobian_values(x, &mut jv);
        let mut g = vec![0.0; n];
        for (&(r, c), &v) in js.iter().zip(&jv) {
            g[c] += lambda[r] * v;
        }
        g
    };
    let mut worst: f64 = 0.0;
    for j in 0..n {
        // the complementarity rows carry gradients near 1e5, so a wider step
        // keeps cancellation below the truncation error
        let h = 1e-4 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        let gp = weighted_grad(&xp);
        xp[j] -= 2.0 * h;
        let gm = weighted_grad(&xp);
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            worst = worst.max((dense[i][j] - fd).abs() / fd.abs().max(1.0));
        }
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn sprint_free_split_dominates() {
    let pt = pt();
    let c = standard::sprint_brake();
    let (fixed, free) = optimize_both(&pt, &c, &NlpOptions::default(), &InteriorPoint).unwrap();
    for r in [&fixed, &free] {
        assert!(r.converged(), "{:?} {:?}", r.status, r.worst_constraint);
        assert!(r.replay_rel_error <= 1e-6);
        assert!(r.complementarity <= 1e-3 * (1.0 + 1e-6));
        assert!(
            r.trajectory.violations.is_empty(),
            "{:?}",
            &r.trajectory.violations[..1]
        );
    }
    assert!(free.e_c < fixed.e_c * 0.99);
    let z = |r: &SolveResult| r.trajectory.ledger.unwrap().zeta;
    assert!(z(&free) > z(&fixed));
}

#[test]
fn pinned_split_follows_adherence() {
    let pt = pt();
    let c = short_cycle();
    let r = optimize(&pt, &c, Mode::Adherence, &NlpOptions::default(), &InteriorPoint, None).unwrap();
    assert!(r.converged());
    for s in &r.trajectory.steps {
        assert!(
            (s.blend.sigma - s.sigma_a.clamp(0.0, 1.0)).abs() < 1e-7,
            "{} {}",
            s.blend.sigma,
            s.sigma_a
        );
    }
}

#[test]
fn solves_are_deterministic() {
    let pt = pt();
    let c = short_cycle();
    let a = optimize(&pt, &c, Mode::Free, &NlpOptions::default(), &InteriorPoint, None).unwrap();
    let b = optimize(&pt, &c, Mode::Free, &NlpOptions::default(), &InteriorPoint, None).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn mostly_parked_cycle_sizes_to_targets() {
    // a standstill step, then a launch and a crawl so the cycle covers distance
    let pt = pt();
    let c = DrivingCycle::new("crawl", 1.0, vec![0.0, 0.0, 1.0], None).unwrap();
    let r = optimize(&pt, &c, Mode::Free, &NlpOptions::default(), &InteriorPoint, None).unwrap();
    assert!(r.converged(), "{:?}", r.status);
    let p = &pt.vehicle;
    let d = r.design;
    let perf = &r.trajectory.performance;
    // range is the only reason to carry battery
    assert!(perf.range.abs() <= 1e-6 * pt.battery.capacity(d.s_b), "{perf:?}");
    let m_rest = p.m_fixed() + pt.battery.mbar_b * d.s_b;
    let s_min = performance::min_motor_scale(p, &pt.front, &pt.rear, m_rest, d.gamma);
    assert!(d.s_m >= s_min * (1.0 - 1e-6), "{} {}", d.s_m, s_min);
    // the standstill step draws exactly the auxiliary load
    let first = &r.trajectory.steps[0];
    assert_eq!((first.p_ac, first.loss_f, first.loss_r), (0.0, 0.0, 0.0));
    let aux = battery_aux(&pt);
    assert!((first.p_b - aux).abs() < 1e-9);
    assert!(r.e_c > aux * c.dt);
    let heuristic = start(&pt, &c);
    let problem = build(&pt, &c, true);
    assert!(r.objective <= problem.objective(&heuristic));
}

fn battery_aux(pt: &Powertrain) -> f64 {
    crate::battery::battery_power(0.0, pt.vehicle.p_aux, pt.vehicle.eta_inv, pt.vehicle.eta_b)
}

#[test]
fn warm_start_length_is_checked() {
    let pt = pt();
    let c = short_cycle();
    let e = optimize(
        &pt,
        &c,
        Mode::Free,
        &NlpOptions::default(),
        &InteriorPoint,
        Some(&[1.0, 2.0]),
    );
    assert!(matches!(e, Err(Error::LengthMismatch(_))));
}
