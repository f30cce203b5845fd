use superbike_core::cycle::{standard, DrivingCycle};
use superbike_core::nlp::{self, Field, Layout, Mode, NlpOptions};
use superbike_core::simulate::Powertrain;
use superbike_core::solver::InteriorPoint;

fn transfer_total(cycle: &DrivingCycle, x: &[f64]) -> f64 {
    let layout = Layout::new(cycle.len());
    (0..cycle.len()).map(|k| x[layout.field(k, Field::FtrF)]).sum()
}

#[test]
fn transfer_weight_is_inert_without_transfer() {
    let pt = Powertrain::reference();
    let cycle = standard::eudc();
    let opts = NlpOptions::default();
    let a = nlp::optimize(&pt, &cycle, Mode::Free, &opts, &InteriorPoint, None).unwrap();
    assert!(transfer_total(&cycle, &a.x) < 1e-6);
    let mut heavy = pt.clone();
    heavy.vehicle.w_obj *= 10.0;
    let b = nlp::optimize(&heavy, &cycle, Mode::Free, &opts, &InteriorPoint, None).unwrap();
    assert!((a.e_c - b.e_c).abs() / a.e_c <= 1e-4, "{} {}", a.e_c, b.e_c);
}

#[test]
fn replay_projection_is_small() {
    let pt = Powertrain::reference();
    for cycle in [standard::ece15(), standard::sprint_brake()] {
        let (fixed, free) = nlp::optimize_both(&pt, &cycle, &NlpOptions::default(), &InteriorPoint).unwrap();
        for r in [fixed, free] {
            assert!(r.converged());
            assert!((r.e_c - r.e_c_nlp).abs() / r.e_c < 1e-4);
            assert!(
                r.worst_constraint.as_ref().map_or(0.0, |w| w.1) < 1e-5,
                "{:?}",
                r.worst_constraint
            );
        }
    }
}

#[test]
fn unreachable_target_is_reported_with_its_row() {
    let mut pt = Powertrain::reference();
    pt.vehicle.t_a_max = 0.3;
    let cycle = standard::ece15();
    let mut opts = NlpOptions::default();
    opts.solver.max_iter = 100;
    opts.fallbacks.clear();
    let r = nlp::optimize(&pt, &cycle, Mode::Free, &opts, &InteriorPoint, None).unwrap();
    assert!(!r.converged());
    let (label, violation) = r.worst_constraint.expect("a violated row");
    assert!(violation > 0.0);
    assert!(!label.is_empty());
}
