use gaugetherm::gauge::apply_gauge;
use gaugetherm::linalg::{c, frobenius};
use gaugetherm::master_equation::{fixed_point, vectorized_liouvillian};
use gaugetherm::models::{
    build_maser, build_maser_rotating, maser_gauge_family, maser_steady_state, maser_thermo,
    MaserGauge, MaserParams,
};
use gaugetherm::path::{accumulate, evolve, machine_report, AccumulateOptions, PathLedger};
use gaugetherm::thermo::{channel_currents_of, invariance_report};
use gaugetherm::{GaugeSpec, GaugedModel};

const STEPS: usize = 2000;

fn cycle(params: &MaserParams, gauge: Option<GaugeSpec>) -> PathLedger {
    let model = build_maser(params).unwrap();
    let gm = match gauge {
        Some(g) => apply_gauge(&model, &g).unwrap(),
        None => GaugedModel::identity(&model),
    };
    let rho0 = maser_steady_state(params).at(0.0);
    let traj = evolve(&model, &rho0, 0.0, params.period(), STEPS).unwrap();
    let opts = AccumulateOptions {
        entropy: true,
        ..Default::default()
    };
    accumulate(&gm, &traj, &opts).unwrap()
}

#[test]
fn closed_form_matches_null_space_of_the_rotating_generator() {
    let p = MaserParams::reference();
    let rho = fixed_point(&build_maser_rotating(&p).unwrap(), 0.0).unwrap();
    let expected = maser_steady_state(&p).rotating();
    for (a, b) in rho.matrix().iter().zip(expected.matrix().iter()) {
        assert!((a - b).norm() <= 1e-9);
    }
    let lv = vectorized_liouvillian(&build_maser_rotating(&p).unwrap(), 0.0).unwrap();
    assert_eq!(lv.nrows(), 9);
}

#[test]
fn frozen_oracle_values() {
    let p = MaserParams::reference();
    let ss = maser_steady_state(&p);
    assert!((ss.rho11 - 0.326_733).abs() < 1e-6);
    assert!((ss.rho22 - 0.475_248).abs() < 1e-6);
    assert!((ss.rho33 - 0.198_020).abs() < 1e-6);
    assert!((ss.rho12 - c(0.0, -0.059_406)).norm() < 1e-6);
    let th = maser_thermo(&p);
    assert!((th.j_h - 0.178_218).abs() < 1e-6);
    assert!((th.j_c + 0.118_812).abs() < 1e-6);
    assert!((th.w_cycle + 0.373_26).abs() < 1e-5);
}

#[test]
fn lab_frame_stays_on_the_limit_cycle() {
    let p = MaserParams::reference();
    let model = build_maser(&p).unwrap();
    let ss = maser_steady_state(&p);
    let traj = evolve(&model, &ss.at(0.0), 0.0, p.period(), STEPS).unwrap();
    for (k, rho) in traj.states.iter().enumerate().step_by(100) {
        let t = traj.times[k];
        assert!(frobenius(&(rho - ss.at(t).matrix())) <= 1e-8);
        let snap = model.snapshot(t).unwrap();
        let rep = invariance_report(&model, t, rho, 1e-8, None).unwrap();
        assert!(rep.invariant);
        let j = channel_currents_of(&snap, rho);
        let th = maser_thermo(&p);
        assert!((j[0] + j[1] - th.j_h).abs() < 1e-8);
    }
}

#[test]
fn cycle_ledger_reproduces_the_engine() {
    let p = MaserParams::reference();
    let th = maser_thermo(&p);
    let ledger = cycle(&p, None);
    let tau = p.period();
    assert!(ledger.cyclic);
    assert!((ledger.q_by_reservoir["hot"] - tau * th.j_h).abs() < 1e-6);
    assert!((ledger.q_by_reservoir["cold"] - tau * th.j_c).abs() < 1e-6);
    assert!((ledger.w - th.w_cycle).abs() < 1e-6);
    assert!((ledger.w + ledger.q).abs() < 1e-8);
    let rep = machine_report(&ledger, "hot", "cold", p.beta_h, p.beta_c, true).unwrap();
    assert!((rep.eta - 1.0 / 3.0).abs() < 1e-6);
    assert!(rep.eta <= rep.carnot_bound);
    assert!(rep.balance_residual < 1e-6, "{}", rep.balance_residual);
}

#[test]
fn shifting_gauge_trades_efficiency_for_entropy() {
    let p = MaserParams::reference();
    let one = c(1.0, 0.0);
    let base = cycle(&p, None);
    let r0 = machine_report(&base, "hot", "cold", p.beta_h, p.beta_c, true).unwrap();
    let shift = MaserGauge::Shifting.predicted_hot_shift(one, &p).unwrap();
    assert!((shift - 0.029_703).abs() < 1e-6);

    for (kind, sign) in [(MaserGauge::Shifting, 1.0), (MaserGauge::ShiftingFlipped, -1.0)] {
        let g = maser_gauge_family(kind, one, &p);
        let ledger = cycle(&p, Some(g.clone()));
        assert!(ledger.cyclic);
        for s in ledger.samples.iter().step_by(250) {
            let base_h: f64 = base.samples.iter().find(|b| b.t == s.t).unwrap().reservoir_currents["hot"];
            let dj = s.reservoir_currents["hot"] - base_h;
            assert!((dj - sign * shift).abs() < 1e-8, "{dj}");
        }
        let r = machine_report(&ledger, "hot", "cold", p.beta_h, p.beta_c, true).unwrap();
        let dq = ledger.q_by_reservoir["hot"] - base.q_by_reservoir["hot"];
        let rhs = (p.beta_c - p.beta_h) * dq;
        assert!((r.sigma_tilde - r0.sigma_tilde - rhs).abs() < 1e-7);
        assert!(sign * (r0.eta - r.eta) > 0.0);
        assert!(sign * (r.sigma_tilde - r0.sigma_tilde) > 0.0);
    }
}

#[test]
fn neutral_gauge_leaves_cycle_heats_unchanged() {
    let p = MaserParams::reference();
    let base = cycle(&p, None);
    let ledger = cycle(&p, Some(maser_gauge_family(MaserGauge::Neutral, c(0.7, 0.2), &p)));
    for tag in ["hot", "cold"] {
        assert!((ledger.q_by_reservoir[tag] - base.q_by_reservoir[tag]).abs() < 1e-6);
    }
}
