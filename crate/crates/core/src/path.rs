//! Fixed-step RK4 trajectories and Simpson-rule heat/work ledgers.

use std::collections::BTreeMap;

use crate::entropy::{self, EpInputs, EpSample};
use crate::error::{Error, Result};
use crate::gauge::GaugedModel;
use crate::linalg::{self, CMatrix};
use crate::master_equation::{
    DensityMatrix, MasterEquationModel, POSITIVITY_ERROR, POSITIVITY_WARN,
};
use crate::thermo::{self, ThermoSample};

pub const TRACE_DRIFT_TOL: f64 = 1e-6;
pub const FIRST_LAW_TOL: f64 = 1e-6;

/// One classical RK4 step of `∂tρ = 𝔏(ρ)`, Hermitized, trace untouched.
/// `dt` may be negative.
pub fn rk4(model: &MasterEquationModel, t: f64, dt: f64, rho: &CMatrix) -> Result<CMatrix> {
    let half = 0.5 * dt;
    let s0 = model.snapshot(t)?;
    let sm = model.snapshot(t + half)?;
    let s1 = model.snapshot(t + dt)?;
    let k1 = s0.liouvillian(rho);
    let k2 = sm.liouvillian(&(rho + k1.scale(half)));
    let k3 = sm.liouvillian(&(rho + k2.scale(half)));
    let k4 = s1.liouvillian(&(rho + k3.scale(dt)));
    let next = rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
    if !linalg::is_finite(&next) {
        return Err(Error::NonFinite(format!("RK4 step at t = {t}")));
    }
    Ok(linalg::hermitize(&next))
}

pub fn step_rk4(
    model: &MasterEquationModel,
    t: f64,
    dt: f64,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::Grid(format!("step {dt} must be positive")));
    }
    Ok(DensityMatrix::new_unchecked(rk4(model, t, dt, rho.matrix())?))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub trace_drift: f64,
    pub min_eigenvalue_seen: f64,
    /// Grid times at which some signature entry changed sign.
    pub signature_switches: Vec<f64>,
}

impl Trajectory {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn last(&self) -> &CMatrix {
        self.states.last().expect("trajectories hold at least two states")
    }
}

pub fn evolve(
    model: &MasterEquationModel,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(Error::Grid(format!("steps = {steps} must be even and at least 2")));
    }
    if t1 <= t0 || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Grid(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho0.dim(),
        });
    }
    let dt = (t1 - t0) / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| t0 + dt * k as f64).collect();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(rho0.matrix().clone());
    let mut trace_drift = rho0.trace_error();
    let mut min_eig = rho0.min_eigenvalue()?;
    let mut switches = Vec::new();
    let mut sig = model.signature().checked_at(t0)?;
    let mut warned = false;
    for k in 0..steps {
        let next = rk4(model, times[k], dt, &states[k])?;
        let drift = (linalg::trace(&next) - linalg::ONE).norm();
        trace_drift = trace_drift.max(drift);
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift { drift });
        }
        let m = linalg::eig_hermitian(&next)?.min();
        min_eig = min_eig.min(m);
        if m < POSITIVITY_ERROR {
            return Err(Error::Positivity { min_eigenvalue: m });
        }
        if m < POSITIVITY_WARN && !warned {
            log::warn!("state at t = {} has eigenvalue {m:.3e}", times[k + 1]);
            warned = true;
        }
        if !model.signature().is_constant() {
            let s = model.signature().checked_at(times[k + 1])?;
            if s != sig {
                log::info!("signature switch near t = {}", times[k + 1]);
                switches.push(times[k + 1]);
                sig = s;
            }
        }
        states.push(next);
    }
    Ok(Trajectory {
        times,
        states,
        trace_drift,
        min_eigenvalue_seen: min_eig,
        signature_switches: switches,
    })
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
pub fn simpson(values: &[f64], dt: f64) -> Result<f64> {
    let n = values.len();
    if n < 3 || !(n - 1).is_multiple_of(2) {
        return Err(Error::Grid(format!(
            "Simpson needs an even number of intervals, got {}",
            n.saturating_sub(1)
        )));
    }
    let inner: f64 = values[1..n - 1]
        .iter()
        .enumerate()
        .map(|(k, v)| if k % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    Ok(dt / 3.0 * (values[0] + inner + values[n - 1]))
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    let dt = times[1] - times[0];
    let tol = 1e-9 * dt.abs().max(times.last().unwrap().abs() * 1e-6);
    if dt <= 0.0 || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > tol) {
        return Err(Error::Grid("quadrature needs a uniform grid".into()));
    }
    Ok(dt)
}

#[derive(Clone, Debug, Default)]
pub struct AccumulateOptions {
    /// Inverse temperature per reservoir tag; defaults to the model's.
    pub betas: Option<BTreeMap<String, f64>>,
    pub rho_star: Option<CMatrix>,
    /// Collect entropy samples (requires full-rank states).
    pub entropy: bool,
}

#[derive(Clone, Debug)]
pub struct PathLedger {
    pub t0: f64,
    pub t1: f64,
    /// `Q_ℓ = ∫𝒥′dt`
    pub q: f64,
    /// `W_ℓ = ∫𝒫′dt`
    pub w: f64,
    pub q_by_reservoir: BTreeMap<String, f64>,
    /// `∫(𝒥_δH + 𝒞_δH)dt`
    pub q_gauge_shift: f64,
    /// `∫⟨∂tδĤ⟩dt`
    pub w_gauge_shift: f64,
    pub delta_energy: f64,
    pub first_law_gap: f64,
    /// `∫∂t𝒮 dt`
    pub entropy_change: Option<f64>,
    /// `∫∂t𝒮 dt − Σ β_tag Q_tag`
    pub sigma_tilde: Option<f64>,
    pub betas: BTreeMap<String, f64>,
    pub cyclic: bool,
    pub trace_drift: f64,
    pub signature_switches: Vec<f64>,
    pub samples: Vec<ThermoSample>,
    pub ep_samples: Vec<EpSample>,
}

/// Tolerance for the state and the thermodynamic quantities to close over a path.
pub const CYCLE_TOL: f64 = 1e-6;

/// Whether the state, energy, current and power return to their initial values.
fn is_cyclic(trajectory: &Trajectory, first: &ThermoSample, last: &ThermoSample) -> bool {
    let close = |a: f64, b: f64| (a - b).abs() <= CYCLE_TOL * a.abs().max(1.0);
    let states = &trajectory.states;
    let drift = linalg::frobenius(&(states.last().expect("grid is non-empty") - &states[0]));
    drift <= CYCLE_TOL
        && close(first.energy, last.energy)
        && close(first.total_current, last.total_current)
        && close(first.power, last.power)
}

pub fn accumulate(
    gm: &GaugedModel,
    trajectory: &Trajectory,
    options: &AccumulateOptions,
) -> Result<PathLedger> {
    let times = &trajectory.times;
    if times.len() != trajectory.states.len() || times.len() < 3 {
        return Err(Error::Grid("trajectory and grid lengths differ".into()));
    }
    let dt = check_uniform(times)?;
    gm.gauge.validate(gm.base.signature(), times)?;

    let betas: BTreeMap<String, f64> = match &options.betas {
        Some(b) => b.clone(),
        None => gm
            .base
            .reservoirs()
            .iter()
            .filter_map(|(k, v)| v.map(|b| (k.clone(), b)))
            .collect(),
    };
    let single_beta = (gm.base.reservoirs().len() == 1)
        .then(|| betas.values().next().copied())
        .flatten();

    let samples = times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, rho)| thermo::thermo_sample(gm, t, rho))
        .collect::<Result<Vec<_>>>()?;

    let integrate = |f: &dyn Fn(&ThermoSample) -> f64| -> Result<f64> {
        simpson(&samples.iter().map(f).collect::<Vec<_>>(), dt)
    };
    let q = integrate(&|s| s.total_current)?;
    let w = integrate(&|s| s.power)?;
    let q_gauge_shift = integrate(&|s| s.j_delta_h + s.c_delta_h)?;
    let w_gauge_shift = integrate(&|s| s.power_delta_h)?;
    let mut q_by_reservoir = BTreeMap::new();
    for tag in gm.base.reservoirs().keys() {
        let v = integrate(&|s| s.reservoir_currents.get(tag).copied().unwrap_or(0.0))?;
        q_by_reservoir.insert(tag.clone(), v);
    }

    let first = samples.first().expect("grid is non-empty");
    let last = samples.last().expect("grid is non-empty");
    let delta_energy = last.energy - first.energy;
    let first_law_gap = (delta_energy - q - w).abs();
    if first_law_gap > FIRST_LAW_TOL * delta_energy.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "first law along the path".into(),
            discrepancy: first_law_gap,
        });
    }

    let mut ep_samples = Vec::new();
    let mut entropy_change = None;
    let mut sigma_tilde = None;
    if options.entropy {
        let rho0 = &trajectory.states[0];
        ep_samples = times
            .iter()
            .zip(&trajectory.states)
            .map(|(&t, rho)| {
                entropy::ep_sample(
                    gm,
                    t,
                    rho,
                    EpInputs {
                        rho0: Some(rho0),
                        rho_star: options.rho_star.as_ref(),
                        beta: single_beta,
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let ds = simpson(
            &ep_samples.iter().map(|e| e.entropy_rate).collect::<Vec<_>>(),
            dt,
        )?;
        entropy_change = Some(ds);
        let tagged_all = gm
            .base
            .reservoirs()
            .keys()
            .all(|k| betas.contains_key(k));
        if tagged_all && !betas.is_empty() {
            let heat_term: f64 = q_by_reservoir
                .iter()
                .map(|(k, qk)| betas[k] * qk)
                .sum();
            sigma_tilde = Some(ds - heat_term);
        }
    }

    Ok(PathLedger {
        t0: times[0],
        t1: *times.last().expect("grid is non-empty"),
        q,
        w,
        q_by_reservoir,
        q_gauge_shift,
        w_gauge_shift,
        delta_energy,
        first_law_gap,
        entropy_change,
        sigma_tilde,
        betas,
        cyclic: is_cyclic(trajectory, first, last),
        trace_drift: trajectory.trace_drift,
        signature_switches: trajectory.signature_switches.clone(),
        samples,
        ep_samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachineReport {
    pub eta: f64,
    pub carnot_bound: f64,
    pub sigma_tilde: f64,
    pub balance_residual: f64,
}

/// Engine figures of merit for a ledger spanning one period.
pub fn machine_report(
    ledger: &PathLedger,
    hot: &str,
    cold: &str,
    beta_h: f64,
    beta_c: f64,
    markovian: bool,
) -> Result<MachineReport> {
    if !ledger.cyclic {
        return Err(Error::NonCyclic);
    }
    let reservoir = |tag: &str| {
        ledger
            .q_by_reservoir
            .get(tag)
            .copied()
            .ok_or_else(|| Error::InvalidParams(format!("ledger has no reservoir {tag:?}")))
    };
    let (q_h, q_c) = (reservoir(hot)?, reservoir(cold)?);
    if q_h <= 0.0 {
        return Err(Error::NotEngine { q_hot: q_h });
    }
    let ds = ledger.entropy_change.ok_or_else(|| {
        Error::MissingContext("machine report needs entropy samples".into())
    })?;
    let sigma_tilde = ds - beta_h * q_h - beta_c * q_c;
    let eta = -ledger.w / q_h;
    let carnot_bound = 1.0 - beta_h / beta_c;
    if markovian && eta > carnot_bound + 1e-8 {
        return Err(Error::CrossCheck {
            what: "efficiency above the Carnot bound".into(),
            discrepancy: eta - carnot_bound,
        });
    }
    Ok(MachineReport {
        eta,
        carnot_bound,
        sigma_tilde,
        balance_residual: (sigma_tilde + beta_h * q_h + beta_c * q_c).abs(),
    })
}
