use gaugetherm::entropy::{ep_rate, ep_sigma};
use gaugetherm::gauge::{apply_gauge, preset_gauge, PresetKind, PresetOptions, TrajectoryContext};
use gaugetherm::linalg::{c, expectation, frobenius, ops};
use gaugetherm::master_equation::liouvillian;
use gaugetherm::models::{
    build_pdm, build_qdbc_decay, pdm_analytic_state, pdm_ep_closed_form, pdm_fixed_point,
    resonance_fluorescence_pair, PdmParams,
};
use gaugetherm::path::{accumulate, evolve, AccumulateOptions};
use gaugetherm::sampling::{random_gauge, random_model, random_state, GaugeOptions, ModelOptions, PhiMode};
use gaugetherm::thermo::{gauge_terms, invariance_report, power, qdbc_check, total_current};
use gaugetherm::{DensityMatrix, Error, GaugeSpec, GaugedModel, TimeFn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rates() -> Vec<(&'static str, TimeFn<f64>)> {
    vec![
        ("constant", TimeFn::constant(1.0)),
        ("decaying", TimeFn::with_derivative(|t: f64| (-t).exp(), |t: f64| -(-t).exp())),
        ("oscillatory", TimeFn::with_derivative(|t: f64| 0.5 + t.cos(), |t: f64| -t.sin())),
    ]
}

#[test]
fn pdm_integrator_matches_closed_form() {
    for (name, rate) in rates() {
        let p = PdmParams::new(1.0, rate, 0.7, c(0.3, 0.2)).unwrap();
        let model = build_pdm(&p).unwrap();
        let traj = evolve(&model, &p.initial_state().unwrap(), 0.0, 5.0, 5000).unwrap();
        let sup = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, rho)| frobenius(&(rho - pdm_analytic_state(&p, t).unwrap().matrix())))
            .fold(0.0, f64::max);
        assert!(sup <= 1e-7, "{name}: {sup:e}");
    }
}

#[test]
fn pdm_unit_rate_coherence_after_unit_time() {
    // with this generator the coherence decays at twice the rate
    let p = PdmParams::constant_rate(0.0, 1.0, 0.5, c(0.4, 0.0)).unwrap();
    let rho = pdm_analytic_state(&p, 1.0).unwrap();
    assert!((rho.matrix()[(0, 1)].norm() - 0.4 * (-2.0f64).exp()).abs() < 1e-14);
    let half = PdmParams::constant_rate(0.0, 0.5, 0.5, c(0.4, 0.0)).unwrap();
    let rho = pdm_analytic_state(&half, 1.0).unwrap();
    assert!((rho.matrix()[(0, 1)].norm() - 0.4 * (-1.0f64).exp()).abs() < 1e-14);
}

#[test]
fn pdm_entropy_production() {
    for (name, rate) in rates() {
        let p = PdmParams::new(1.0, rate, 0.5, c(0.4, 0.0)).unwrap();
        let model = build_pdm(&p).unwrap();
        let star = pdm_fixed_point(&p);
        let rho0 = p.initial_state().unwrap();
        let traj = evolve(&model, &rho0, 0.0, 5.0, 5000).unwrap();
        let mut negative = 0;
        for (k, (&t, rho)) in traj.times.iter().zip(&traj.states).enumerate().step_by(10) {
            let sigma = ep_sigma(rho0.matrix(), rho, star.matrix()).unwrap();
            let (closed, closed_rate) = pdm_ep_closed_form(&p, t);
            assert!((sigma - closed).abs() <= 1e-8, "{name} t={t}");
            assert!(sigma >= -1e-9);
            if k > 0 {
                let e = ep_rate(&model, t, rho, star.matrix()).unwrap();
                assert!((e - closed_rate).abs() <= 1e-6 * closed_rate.abs().max(1.0), "{name} t={t}");
                if p.gamma.at(t) < -1e-3 {
                    assert!(e < 0.0);
                    negative += 1;
                }
            }
        }
        assert_eq!(negative > 0, name == "oscillatory");
    }
}

fn sine_gauge() -> GaugeSpec {
    GaugeSpec::from_gamma(vec![TimeFn::with_derivative(
        |t: f64| c(0.0, t.sin()),
        |t: f64| c(0.0, t.cos()),
    )])
}

#[test]
fn pdm_work_under_a_sine_gauge() {
    let p = PdmParams::constant_rate(1.0, 1.0, 0.7, c(0.3, 0.0)).unwrap();
    let model = build_pdm(&p).unwrap();
    let rho0 = p.initial_state().unwrap();
    let report = invariance_report(&model, 0.5, rho0.matrix(), 1e-9, None).unwrap();
    assert!(!report.invariant);
    let gm = apply_gauge(&model, &sine_gauge()).unwrap();
    for t1 in [1.0, 2.5, 4.0] {
        let traj = evolve(&model, &rho0, 0.0, t1, 2000).unwrap();
        let ledger = accumulate(&gm, &traj, &AccumulateOptions::default()).unwrap();
        assert!((ledger.w + 0.4 * t1.sin()).abs() <= 1e-7, "t1={t1}: {}", ledger.w);
    }
}

#[test]
fn pdm_at_half_filling_is_invariant() {
    let p = PdmParams::constant_rate(1.0, 1.0, 0.5, c(0.3, 0.1)).unwrap();
    let model = build_pdm(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = GaugeOptions {
        phi: PhiMode::Zero,
        ..Default::default()
    };
    for t in [0.3, 1.7] {
        let rho = pdm_analytic_state(&p, t).unwrap();
        assert!(invariance_report(&model, t, rho.matrix(), 1e-12, None).unwrap().invariant);
        let j = total_current(&model, t, rho.matrix()).unwrap();
        let e = expectation(&model.snapshot(t).unwrap().hamiltonian, rho.matrix()).unwrap().re;
        for _ in 0..100 {
            let g = random_gauge(&mut rng, &[1.0], &opts);
            let gm = apply_gauge(&model, &g).unwrap();
            let j1 = total_current(&gm.transformed, t, rho.matrix()).unwrap();
            let p1 = power(&gm.transformed, t, rho.matrix()).unwrap();
            let e1 = expectation(&gm.transformed.snapshot(t).unwrap().hamiltonian, rho.matrix())
                .unwrap()
                .re;
            assert!((j1 - j).abs() <= 1e-8 && p1.abs() <= 1e-8 && (e1 - e).abs() <= 1e-8);
        }
    }
}

#[test]
fn qdbc_decay_satisfies_detailed_balance() {
    let (omega0, beta) = (1.2, 0.7);
    let (model, h_s) = build_qdbc_decay(omega0, beta, 0.9).unwrap();
    let report = qdbc_check(&model, &h_s, beta, &[omega0]).unwrap();
    assert!(report.max_condition_residual() <= 1e-12);
    assert!(report.gibbs_fixed_point_residual <= 1e-10);
    assert!(report.mean_a_at_gibbs.iter().all(|z| z.norm() <= 1e-12));
    for p in [0.1, 0.5, 0.9] {
        let rho0 = DensityMatrix::new(ops::diag(&[p, 1.0 - p])).unwrap();
        let traj = evolve(&model, &rho0, 0.0, 3.0, 300).unwrap();
        for (&t, rho) in traj.times.iter().zip(&traj.states).skip(1) {
            assert!(invariance_report(&model, t, rho, 1e-12, None).unwrap().invariant);
        }
    }
}

#[test]
fn qdbc_needs_nonzero_bohr_frequencies() {
    let p = PdmParams::constant_rate(1.0, 1.0, 0.5, c(0.0, 0.0)).unwrap();
    let model = build_pdm(&p).unwrap();
    let h = model.hamiltonian().clone();
    assert!(matches!(qdbc_check(&model, &h, 1.0, &[0.0]), Err(Error::Precondition(_))));
}

#[test]
fn fluorescence_presentations_agree() {
    let pair = resonance_fluorescence_pair(2.0, 1.6, 0.5, 0.7, 0.4).unwrap();
    let gm = apply_gauge(&pair.displaced, &pair.witness).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..100 {
        let t = 0.07 * k as f64;
        let rho = random_state(&mut rng, 2, 0.05);
        let a = liouvillian(&pair.driven, t, rho.matrix()).unwrap();
        let b = liouvillian(&pair.displaced, t, rho.matrix()).unwrap();
        assert!(frobenius(&(&a - &b)) <= 1e-9);

        let j_driven = total_current(&pair.driven, t, rho.matrix()).unwrap();
        let j_disp = total_current(&pair.displaced, t, rho.matrix()).unwrap();
        let p_driven = power(&pair.driven, t, rho.matrix()).unwrap();
        let p_disp = power(&pair.displaced, t, rho.matrix()).unwrap();
        let terms = gauge_terms(&pair.displaced, &pair.witness, t, rho.matrix()).unwrap();
        assert_eq!(p_disp, 0.0);
        assert!((j_driven - j_disp - terms.j_delta_h - terms.c_delta_h).abs() <= 1e-8);
        assert!((p_driven - p_disp - terms.power_delta_h).abs() <= 1e-8);
        let dh = gm.delta_h(t).unwrap();
        let v = pair.driven.hamiltonian().at(t) - pair.displaced.hamiltonian().at(t);
        assert!(frobenius(&(dh - v)) <= 1e-12);
    }
}

#[test]
fn context_presets_do_what_they_promise() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = ModelOptions {
        mixed_signature: false,
        ..ModelOptions::new(3, 2)
    };
    let model = random_model(&mut rng, &opts);
    let rho0 = random_state(&mut rng, 3, 0.3);
    let traj = evolve(&model, &rho0, 0.0, 2.0, 400).unwrap();
    let ctx = TrajectoryContext::new(&model, traj.times.clone(), traj.states.clone()).unwrap();
    let popts = PresetOptions {
        seed: Some(vec![c(0.4, 0.1), c(-0.2, 0.3)]),
        base_gauge: None,
    };
    let make = |kind| {
        let g = preset_gauge(kind, &model, Some(&ctx), &popts).unwrap();
        apply_gauge(&model, &g).unwrap()
    };
    let energy = make(PresetKind::EnergyPreserving);
    let powered = make(PresetKind::PowerPreserving);
    let current = make(PresetKind::CurrentPreserving);
    let plain = GaugedModel::identity(&model);
    for (&t, rho) in traj.times.iter().zip(&traj.states).step_by(20) {
        let dh = energy.delta_h(t).unwrap();
        assert!(expectation(&dh, rho).unwrap().norm() <= 1e-9);
        let p0 = power(&plain.transformed, t, rho).unwrap();
        assert!((power(&powered.transformed, t, rho).unwrap() - p0).abs() <= 1e-8);
        let j0 = total_current(&model, t, rho).unwrap();
        assert!((total_current(&current.transformed, t, rho).unwrap() - j0).abs() <= 1e-8);
        assert!((power(&current.transformed, t, rho).unwrap() - p0).abs() <= 1e-8);
    }
}
