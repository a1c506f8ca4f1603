//! Executes one scenario and renders its CSV and summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gaugetherm::gauge::{apply_gauge, TrajectoryContext, INVARIANCE_TOL};
use gaugetherm::linalg::{self, hermitize};
use gaugetherm::master_equation::VALIDATION_TIMES;
use gaugetherm::path::{accumulate, evolve, machine_report, AccumulateOptions, PathLedger, Trajectory};
use gaugetherm::thermo::{invariance_report, qdbc_check};
use gaugetherm::{DensityMatrix, GaugeSpec, GaugedModel, Signature};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::build::{build_gauge, build_scenario, initial_state, needs_context, validate_config, Builtin, Scenario};
use crate::config::{GaugeConfig, MachineConfig, ScenarioConfig};
use crate::error::{CliError, CliResult, Context};

pub struct GaugeRun {
    pub label: String,
    pub csv: String,
    pub summary: Value,
}

pub struct RunOutput {
    pub gauges: Vec<GaugeRun>,
    pub summary: Value,
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn is_markovian(sig: &Signature) -> bool {
    matches!(sig, Signature::Constant(d) if d.iter().all(|&g| g > 0.0))
}

/// Evolves over `[t0 − burn_in, t0]` with the recording step, rounded up to an
/// even number of steps.
fn burn_in(
    scenario: &Scenario,
    cfg: &ScenarioConfig,
    duration: f64,
) -> CliResult<DensityMatrix> {
    let time = cfg.time;
    let dt = (time.t1 - time.t0) / time.steps as f64;
    let mut n = (duration / dt).ceil().max(2.0) as usize;
    n += n % 2;
    let start = time.t0 - n as f64 * dt;
    let rho = initial_state(&cfg.initial_state, scenario, start)?;
    let traj = evolve(&scenario.model, &rho, start, time.t0, n).at("analyses.machine.burn_in")?;
    let last = hermitize(traj.last());
    let tr = linalg::trace(&last).re;
    DensityMatrix::new(last / num_complex::Complex64::new(tr, 0.0)).at("analyses.machine.burn_in")
}

pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<RunOutput> {
    validate_config(cfg)?;
    let scenario = build_scenario(&cfg.model)?;
    let time = cfg.time;
    let labels: Vec<String> = cfg.gauges.iter().enumerate().map(|(k, g)| g.label(k)).collect();
    for (k, l) in labels.iter().enumerate() {
        if labels[..k].contains(l) {
            return Err(CliError::schema(format!("gauges[{k}].label"), format!("duplicate label {l:?}")));
        }
    }

    let rho0 = match cfg.analyses.machine.as_ref().filter(|m| m.burn_in > 0.0) {
        Some(m) => burn_in(&scenario, cfg, m.burn_in)?,
        None => initial_state(&cfg.initial_state, &scenario, time.t0)?,
    };
    let traj = evolve(&scenario.model, &rho0, time.t0, time.t1, time.steps).at("time")?;
    log::info!(
        "evolved {} steps, trace drift {:.3e}",
        traj.steps(),
        traj.trace_drift
    );

    let ctx = if cfg.gauges.iter().any(needs_context) {
        Some(
            TrajectoryContext::new(&scenario.model, traj.times.clone(), traj.states.clone())
                .at("gauges")?,
        )
    } else {
        None
    };

    let gauges = cfg
        .gauges
        .par_iter()
        .enumerate()
        .map(|(k, g)| run_gauge(cfg, &scenario, &traj, ctx.as_ref(), k, g, &labels[k]))
        .collect::<CliResult<Vec<_>>>()?;

    let mut summary = Map::new();
    summary.insert("name".into(), json!(cfg.name));
    summary.insert("model".into(), json!(cfg.model.kind()));
    summary.insert(
        "time".into(),
        json!({"t0": time.t0, "t1": time.t1, "steps": time.steps}),
    );
    summary.insert("trace_drift".into(), finite(traj.trace_drift));
    summary.insert("min_eigenvalue_seen".into(), finite(traj.min_eigenvalue_seen));
    summary.insert("signature_switches".into(), json!(traj.signature_switches));
    if cfg.analyses.qdbc {
        summary.insert("qdbc".into(), qdbc_summary(&scenario));
    }
    summary.insert(
        "gauges".into(),
        Value::Array(gauges.iter().map(|g| g.summary.clone()).collect()),
    );
    Ok(RunOutput {
        gauges,
        summary: Value::Object(summary),
    })
}

fn run_gauge(
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    traj: &Trajectory,
    ctx: Option<&TrajectoryContext>,
    index: usize,
    gcfg: &GaugeConfig,
    label: &str,
) -> CliResult<GaugeRun> {
    let path = format!("gauges[{index}]");
    let gauge = build_gauge(gcfg, index, scenario, ctx)?;
    gauge.validate(scenario.model.signature(), &VALIDATION_TIMES).at(&path)?;
    let gm = apply_gauge(&scenario.model, &gauge).at(&path)?;
    let mut summary = Map::new();
    summary.insert("label".into(), json!(label));

    if !cfg.analyses.thermo {
        let csv = energy_csv(&gm, traj).at(&path)?;
        return Ok(GaugeRun {
            label: label.into(),
            csv,
            summary: Value::Object(summary),
        });
    }

    let entropy = cfg.analyses.entropy || cfg.analyses.machine.is_some();
    let opts = AccumulateOptions {
        betas: None,
        rho_star: scenario.rho_star.clone(),
        entropy,
    };
    let ledger = accumulate(&gm, traj, &opts).at(&path)?;
    summary.insert("ledger".into(), ledger_summary(&ledger));
    if let Some(m) = &cfg.analyses.machine {
        summary.insert("machine".into(), machine_summary(&ledger, m, scenario));
    }
    if cfg.analyses.invariance {
        summary.insert(
            "invariance".into(),
            invariance_summary(&scenario.model, &gauge, traj).at(&path)?,
        );
    }
    Ok(GaugeRun {
        label: label.into(),
        csv: ledger_csv(&gm, &ledger),
        summary: Value::Object(summary),
    })
}

fn ledger_summary(l: &PathLedger) -> Value {
    let by_res: Map<String, Value> = l
        .q_by_reservoir
        .iter()
        .map(|(k, v)| (k.clone(), finite(*v)))
        .collect();
    json!({
        "Q": finite(l.q),
        "W": finite(l.w),
        "Q_by_reservoir": by_res,
        "Q_gauge_shift": finite(l.q_gauge_shift),
        "W_gauge_shift": finite(l.w_gauge_shift),
        "delta_energy": finite(l.delta_energy),
        "first_law_gap": finite(l.first_law_gap),
        "entropy_change": l.entropy_change.map(finite),
        "sigma_tilde": l.sigma_tilde.map(finite),
        "cyclic": l.cyclic,
        "trace_drift": finite(l.trace_drift),
        "signature_switches": l.signature_switches,
    })
}

fn machine_summary(l: &PathLedger, m: &MachineConfig, scenario: &Scenario) -> Value {
    let beta = |given: Option<f64>, tag: &str| given.or_else(|| l.betas.get(tag).copied());
    let (Some(bh), Some(bc)) = (beta(m.beta_h, &m.hot), beta(m.beta_c, &m.cold)) else {
        return json!({"error": "inverse temperatures of the hot and cold reservoirs are unknown"});
    };
    match machine_report(l, &m.hot, &m.cold, bh, bc, is_markovian(scenario.model.signature())) {
        Ok(r) => json!({
            "eta": finite(r.eta),
            "carnot_bound": finite(r.carnot_bound),
            "sigma_tilde": finite(r.sigma_tilde),
            "balance_residual": finite(r.balance_residual),
        }),
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn invariance_summary(
    model: &gaugetherm::MasterEquationModel,
    gauge: &GaugeSpec,
    traj: &Trajectory,
) -> gaugetherm::Result<Value> {
    let (mut max_l, mut max_dl, mut max_dphi) = (0.0f64, 0.0f64, 0.0f64);
    let mut invariant = true;
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let r = invariance_report(model, t, rho, INVARIANCE_TOL, Some(gauge))?;
        invariant &= r.invariant;
        max_l = r.mean_l.iter().fold(max_l, |a, z| a.max(z.norm()));
        max_dl = r.mean_dl.iter().fold(max_dl, |a, z| a.max(z.norm()));
        max_dphi = max_dphi.max(r.dphi_dt.unwrap_or(0.0).abs());
    }
    Ok(json!({
        "invariant": invariant,
        "tol": INVARIANCE_TOL,
        "max_mean_l": finite(max_l),
        "max_mean_dl": finite(max_dl),
        "max_dphi_dt": finite(max_dphi),
    }))
}

fn qdbc_summary(scenario: &Scenario) -> Value {
    let Builtin::Qdbc { h_s, beta, omega0 } = &scenario.builtin else {
        return json!({"error": "detailed-balance analysis needs the qdbc_decay model"});
    };
    match qdbc_check(&scenario.model, h_s, *beta, &[*omega0]) {
        Ok(r) => {
            let max_mean = r.mean_a_at_gibbs.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            json!({
                "commutes_a": finite(r.commutes_a),
                "eigenoperator_b": r.eigenoperator_b,
                "pairing_c": r.pairing_c,
                "max_condition_residual": finite(r.max_condition_residual()),
                "gibbs_fixed_point_residual": finite(r.gibbs_fixed_point_residual),
                "max_mean_a_at_gibbs": finite(max_mean),
                "satisfied": r.max_condition_residual() <= 1e-10 && r.gibbs_fixed_point_residual <= 1e-10,
            })
        }
        Err(e) => json!({"error": e.to_string()}),
    }
}

fn energy_csv(gm: &GaugedModel, traj: &Trajectory) -> gaugetherm::Result<String> {
    let mut out = String::from("t,energy\n");
    for (&t, rho) in traj.times.iter().zip(&traj.states) {
        let e = linalg::expectation(&gm.transformed.hamiltonian().at(t), rho)?.re;
        let _ = writeln!(out, "{},{}", fmt_num(t), fmt_num(e));
    }
    Ok(out)
}

/// Column names of the per-gauge CSV.
pub fn csv_header(gm: &GaugedModel) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "energy".into(), "J_total".into()];
    cols.extend(gm.base.channels().iter().map(|c| format!("J_mu_{}", c.lindblad.label())));
    cols.extend(gm.base.reservoirs().keys().map(|k| format!("J_res_{k}")));
    for c in ["P", "J_dH", "C_dH", "P_dH", "residual", "S", "dS_dt", "Sigma", "E_rate", "E_thermal"] {
        cols.push(c.into());
    }
    cols
}

fn ledger_csv(gm: &GaugedModel, ledger: &PathLedger) -> String {
    let mut out = csv_header(gm).join(",");
    out.push('\n');
    let nan = f64::NAN;
    for (k, s) in ledger.samples.iter().enumerate() {
        let mut row = vec![s.t, s.energy, s.total_current];
        row.extend(&s.channel_currents);
        row.extend(
            gm.base
                .reservoirs()
                .keys()
                .map(|tag| s.reservoir_currents.get(tag).copied().unwrap_or(0.0)),
        );
        row.extend([s.power, s.j_delta_h, s.c_delta_h, s.power_delta_h, s.first_law_residual]);
        match ledger.ep_samples.get(k) {
            Some(e) => row.extend([
                e.entropy,
                e.entropy_rate,
                e.sigma.unwrap_or(nan),
                e.ep_rate.unwrap_or(nan),
                e.thermal_ep_rate.unwrap_or(nan),
            ]),
            None => row.extend([nan; 5]),
        }
        let cells: Vec<String> = row.into_iter().map(fmt_num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Where the CSV of gauge `label` goes.
pub fn csv_path(template: &str, label: &str, several: bool, base: &Path) -> PathBuf {
    let rel = if template.contains("{gauge}") {
        PathBuf::from(template.replace("{gauge}", label))
    } else if several {
        let p = Path::new(template);
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        let name = match p.extension().and_then(|e| e.to_str()) {
            Some(ext) => format!("{stem}_{label}.{ext}"),
            None => format!("{stem}_{label}"),
        };
        p.with_file_name(name)
    } else {
        PathBuf::from(template)
    };
    if rel.is_absolute() {
        rel
    } else {
        base.join(rel)
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    let display = path.display().to_string();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(&display, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(&display, e))
}

/// Writes CSVs and the summary; returns the summary with the CSV paths filled in.
pub fn write_outputs(
    cfg: &ScenarioConfig,
    out: &RunOutput,
    base: &Path,
    default_stem: &str,
) -> CliResult<Value> {
    let template = cfg
        .outputs
        .csv_path
        .clone()
        .unwrap_or_else(|| format!("{default_stem}.csv"));
    let several = out.gauges.len() > 1;
    let mut summary = out.summary.clone();
    for (k, g) in out.gauges.iter().enumerate() {
        let path = csv_path(&template, &g.label, several, base);
        write_file(&path, &g.csv)?;
        summary["gauges"][k]["csv"] = json!(path.display().to_string());
    }
    if let Some(p) = &cfg.outputs.summary_path {
        let path = if Path::new(p).is_absolute() {
            PathBuf::from(p)
        } else {
            base.join(p)
        };
        write_file(&path, &pretty(&summary))?;
    }
    Ok(summary)
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}
