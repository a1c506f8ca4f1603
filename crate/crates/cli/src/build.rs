//! Turns configuration into models, states and gauges.

use std::collections::BTreeMap;
use std::str::FromStr;

use gaugetherm::expr::Expr;
use gaugetherm::gauge::{preset_gauge, PresetKind, PresetOptions, TrajectoryContext};
use gaugetherm::linalg::{self, CMatrix};
use gaugetherm::master_equation::{fixed_point, UNTAGGED};
use gaugetherm::models::{
    build_maser, build_pdm, build_qdbc_decay, maser_gauge_family, maser_steady_state,
    pdm_fixed_point, resonance_fluorescence_pair, MaserGauge, MaserParams, PdmParams,
};
use gaugetherm::{
    Channel, DensityMatrix, GaugeSpec, MasterEquationModel, Operator, Signature, TimeFn,
};
use num_complex::Complex64;

use crate::config::{
    ExprMatrix, GaugeConfig, InitialState, InlineModel, ModelConfig, Presentation, Scalar,
    ScenarioConfig, SCHEMA_VERSION,
};
use crate::error::{CliError, CliResult, Context};

pub enum Builtin {
    Pdm(PdmParams),
    Maser(MaserParams),
    Fluorescence {
        witness: GaugeSpec,
        presentation: Presentation,
    },
    Qdbc {
        h_s: Operator,
        beta: f64,
        omega0: f64,
    },
    Inline,
}

pub struct Scenario {
    pub model: MasterEquationModel,
    pub builtin: Builtin,
    /// Reference state for relative-entropy quantities, when one is known.
    pub rho_star: Option<CMatrix>,
}

pub fn validate_config(cfg: &ScenarioConfig) -> CliResult<()> {
    if cfg.schema != SCHEMA_VERSION {
        return Err(CliError::schema(
            "schema",
            format!("unsupported schema {}, expected {SCHEMA_VERSION}", cfg.schema),
        ));
    }
    let time = &cfg.time;
    if !(time.t0.is_finite() && time.t1.is_finite()) || time.t1 <= time.t0 {
        return Err(CliError::schema("time", "need finite t0 < t1"));
    }
    if time.steps < 2 || !time.steps.is_multiple_of(2) {
        return Err(CliError::schema("time.steps", "steps must be even and at least 2"));
    }
    if cfg.gauges.is_empty() {
        return Err(CliError::schema("gauges", "at least one gauge is required"));
    }
    if let Some(m) = &cfg.analyses.machine {
        if m.burn_in < 0.0 || !m.burn_in.is_finite() {
            return Err(CliError::schema("analyses.machine.burn_in", "must be finite and >= 0"));
        }
        if let Some(p) = m.period {
            if (p - (time.t1 - time.t0)).abs() > 1e-9 * p.abs().max(1.0) {
                return Err(CliError::schema(
                    "analyses.machine.period",
                    "the recorded window t1 - t0 must span exactly one period",
                ));
            }
        }
    }
    if let Some(s) = &cfg.sweep {
        if s.values.is_empty() {
            return Err(CliError::schema("sweep.values", "value list is empty"));
        }
    }
    Ok(())
}

fn parse_scalar(s: &Scalar, path: &str) -> CliResult<Expr> {
    match s {
        Scalar::Number(x) => Ok(Expr::constant(Complex64::new(*x, 0.0))),
        Scalar::Expr(src) => Expr::parse(src).at(path),
    }
}

fn parse_matrix(m: &ExprMatrix, dim: usize, path: &str) -> CliResult<Vec<Expr>> {
    if m.len() != dim || m.iter().any(|row| row.len() != dim) {
        return Err(CliError::schema(path, format!("expected a {dim}x{dim} matrix")));
    }
    let mut out = Vec::with_capacity(dim * dim);
    for (j, row) in m.iter().enumerate() {
        for (k, entry) in row.iter().enumerate() {
            out.push(parse_scalar(entry, &format!("{path}[{j}][{k}]"))?);
        }
    }
    Ok(out)
}

/// Row-major expressions as a matrix-valued time function.
fn matrix_timefn(entries: Vec<Expr>, dim: usize) -> TimeFn<CMatrix> {
    let derivs: Vec<Expr> = entries.iter().map(Expr::derivative).collect();
    if !entries.iter().any(Expr::depends_on_t) {
        return TimeFn::constant(CMatrix::from_fn(dim, dim, |j, k| entries[j * dim + k].eval(0.0)));
    }
    TimeFn::with_derivative(
        move |t| CMatrix::from_fn(dim, dim, |j, k| entries[j * dim + k].eval(t)),
        move |t| CMatrix::from_fn(dim, dim, |j, k| derivs[j * dim + k].eval(t)),
    )
}

fn build_inline(m: &InlineModel) -> CliResult<Scenario> {
    let dim = m.dim;
    if dim == 0 {
        return Err(CliError::schema("model.dim", "dimension must be positive"));
    }
    let h = matrix_timefn(parse_matrix(&m.hamiltonian, dim, "model.hamiltonian")?, dim);
    let mut channels = Vec::new();
    for (mu, ch) in m.channels.iter().enumerate() {
        let path = format!("model.channels[{mu}]");
        let op = matrix_timefn(parse_matrix(&ch.operator, dim, &format!("{path}.operator"))?, dim);
        let label = ch.label.clone().unwrap_or_else(|| format!("L{mu}"));
        let tag = ch.reservoir.clone().unwrap_or_else(|| UNTAGGED.to_string());
        if tag != UNTAGGED && !m.reservoirs.contains_key(&tag) {
            return Err(CliError::schema(
                format!("{path}.reservoir"),
                format!("reservoir {tag:?} is not declared"),
            ));
        }
        channels.push(Channel::new(Operator::from_timefn(dim, label, op), tag));
    }
    let signature = match &m.signature {
        None => Signature::positive(channels.len()),
        Some(entries) => {
            if entries.len() != channels.len() {
                return Err(CliError::schema(
                    "model.signature",
                    format!("expected {} entries", channels.len()),
                ));
            }
            if entries.iter().all(|e| matches!(e, Scalar::Number(_))) {
                let diag = entries
                    .iter()
                    .map(|e| match e {
                        Scalar::Number(x) => *x,
                        Scalar::Expr(_) => unreachable!(),
                    })
                    .collect();
                Signature::constant(diag).at("model.signature")?
            } else {
                let exprs = entries
                    .iter()
                    .enumerate()
                    .map(|(k, e)| parse_scalar(e, &format!("model.signature[{k}]")))
                    .collect::<CliResult<Vec<_>>>()?;
                Signature::time_dependent(exprs.len(), move |t| {
                    exprs
                        .iter()
                        .map(|e| if e.eval(t).re < 0.0 { -1.0 } else { 1.0 })
                        .collect()
                })
            }
        }
    };
    let model = MasterEquationModel::new(
        Operator::from_timefn(dim, "H", h),
        channels,
        signature,
        m.reservoirs.clone(),
    )
    .at("model")?;
    let rho_star = autonomous_fixed_point(&model);
    Ok(Scenario {
        model,
        builtin: Builtin::Inline,
        rho_star,
    })
}

fn autonomous_fixed_point(model: &MasterEquationModel) -> Option<CMatrix> {
    if !model.is_autonomous() {
        return None;
    }
    let rho = fixed_point(model, 0.0).ok()?;
    (rho.min_eigenvalue().ok()? > linalg::LOG_CLAMP).then(|| rho.into_matrix())
}

pub fn build_scenario(cfg: &ModelConfig) -> CliResult<Scenario> {
    match cfg {
        ModelConfig::Pdm {
            omega,
            gamma,
            p,
            rho01,
        } => {
            let rate = parse_scalar(gamma, "model.gamma")?.to_real_timefn();
            let params = PdmParams::new(*omega, rate, *p, rho01.value()).at("model")?;
            let model = build_pdm(&params).at("model")?;
            let star = pdm_fixed_point(&params);
            let rho_star = (star.min_eigenvalue().unwrap_or(0.0) > linalg::LOG_CLAMP)
                .then(|| star.into_matrix());
            Ok(Scenario {
                model,
                builtin: Builtin::Pdm(params),
                rho_star,
            })
        }
        ModelConfig::Maser {
            levels,
            epsilon,
            gamma,
            nbar_h,
            nbar_c,
            beta_h,
            beta_c,
        } => {
            let params = match (nbar_h, nbar_c, beta_h, beta_c) {
                (Some(nh), Some(nc), None, None) => {
                    MaserParams::from_occupations(*levels, *epsilon, *gamma, *nh, *nc)
                }
                (None, None, Some(bh), Some(bc)) => {
                    MaserParams::new(*levels, *epsilon, *gamma, *bh, *bc)
                }
                _ => {
                    return Err(CliError::schema(
                        "model",
                        "give either nbar_h and nbar_c or beta_h and beta_c",
                    ))
                }
            }
            .at("model")?;
            let model = build_maser(&params).at("model")?;
            Ok(Scenario {
                model,
                builtin: Builtin::Maser(params),
                rho_star: None,
            })
        }
        ModelConfig::ResonanceFluorescence {
            omega0,
            omega,
            drive,
            gamma,
            nbar,
            presentation,
        } => {
            let pair = resonance_fluorescence_pair(*omega0, *omega, *drive, *gamma, *nbar).at("model")?;
            let model = match presentation {
                Presentation::Driven => pair.driven,
                Presentation::Displaced => pair.displaced,
            };
            Ok(Scenario {
                model,
                builtin: Builtin::Fluorescence {
                    witness: pair.witness,
                    presentation: *presentation,
                },
                rho_star: None,
            })
        }
        ModelConfig::QdbcDecay {
            omega0,
            beta,
            gamma,
        } => {
            let (model, h_s) = build_qdbc_decay(*omega0, *beta, *gamma).at("model")?;
            let rho_star = autonomous_fixed_point(&model);
            Ok(Scenario {
                model,
                builtin: Builtin::Qdbc {
                    h_s,
                    beta: *beta,
                    omega0: *omega0,
                },
                rho_star,
            })
        }
        ModelConfig::Inline(m) => build_inline(m),
    }
}

pub fn initial_state(cfg: &InitialState, scenario: &Scenario, t: f64) -> CliResult<DensityMatrix> {
    let path = "initial_state";
    let dim = scenario.model.dim();
    match cfg {
        InitialState::Matrix(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(CliError::schema(path, format!("expected a {dim}x{dim} matrix")));
            }
            let m = CMatrix::from_fn(dim, dim, |j, k| {
                let [re, im] = rows[j][k];
                Complex64::new(re, im)
            });
            DensityMatrix::new(m).at(path)
        }
        InitialState::Named(name) => match name.as_str() {
            "maximally_mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
            "gibbs" => {
                let betas: Vec<f64> = scenario.model.reservoirs().values().flatten().copied().collect();
                let beta = match (&scenario.builtin, betas.as_slice()) {
                    (Builtin::Qdbc { beta, .. }, _) => *beta,
                    (_, [b]) => *b,
                    _ => {
                        return Err(CliError::schema(
                            path,
                            "gibbs needs exactly one reservoir with an inverse temperature",
                        ))
                    }
                };
                let h = match &scenario.builtin {
                    Builtin::Qdbc { h_s, .. } => h_s.at(t),
                    _ => scenario.model.hamiltonian().at(t),
                };
                DensityMatrix::gibbs(&h, beta).at(path)
            }
            "pdm_initial" => match &scenario.builtin {
                Builtin::Pdm(p) => p.initial_state().at(path),
                _ => Err(CliError::schema(path, "pdm_initial requires the pdm model")),
            },
            "limit_cycle" => match &scenario.builtin {
                Builtin::Maser(p) => Ok(maser_steady_state(p).at(t)),
                _ => Err(CliError::schema(path, "limit_cycle requires the maser model")),
            },
            "fixed_point" => {
                if !scenario.model.is_autonomous() {
                    return Err(CliError::schema(path, "fixed_point requires an autonomous model"));
                }
                fixed_point(&scenario.model, t).at(path)
            }
            other => Err(CliError::schema(path, format!("unknown named state {other:?}"))),
        },
    }
}

/// Whether `cfg` needs ρ(t) from the base trajectory.
pub fn needs_context(cfg: &GaugeConfig) -> bool {
    matches!(cfg, GaugeConfig::Preset { preset, .. } if preset != "minimal_dissipation")
}

pub fn build_gauge(
    cfg: &GaugeConfig,
    index: usize,
    scenario: &Scenario,
    ctx: Option<&TrajectoryContext>,
) -> CliResult<GaugeSpec> {
    let path = format!("gauges[{index}]");
    let model = &scenario.model;
    let m = model.num_channels();
    match cfg {
        GaugeConfig::Identity { .. } => Ok(GaugeSpec::identity(m)),
        GaugeConfig::Preset { preset, seed, .. } => {
            let kind = PresetKind::from_str(preset).at(&format!("{path}.preset"))?;
            let opts = PresetOptions {
                seed: seed.as_ref().map(|s| s.iter().map(|z| z.value()).collect()),
                base_gauge: None,
            };
            preset_gauge(kind, model, ctx, &opts).at(&path)
        }
        GaugeConfig::Maser { family, c, .. } => {
            let Builtin::Maser(params) = &scenario.builtin else {
                return Err(CliError::schema(&path, "maser gauges require the maser model"));
            };
            let kind = MaserGauge::from_str(family).at(&format!("{path}.family"))?;
            Ok(maser_gauge_family(kind, c.value(), params))
        }
        GaugeConfig::Witness { .. } => match &scenario.builtin {
            Builtin::Fluorescence {
                witness,
                presentation: Presentation::Displaced,
            } => Ok(witness.clone()),
            Builtin::Fluorescence {
                witness,
                presentation: Presentation::Driven,
            } => Ok(witness.inverse(model.signature())),
            _ => Err(CliError::schema(
                &path,
                "the witness gauge requires the resonance_fluorescence model",
            )),
        },
        GaugeConfig::Inline {
            gamma, umatrix, phi, ..
        } => {
            if gamma.len() != m {
                return Err(CliError::schema(
                    format!("{path}.gamma"),
                    format!("expected {m} entries"),
                ));
            }
            let gammas = gamma
                .iter()
                .enumerate()
                .map(|(k, g)| Ok(parse_scalar(g, &format!("{path}.gamma[{k}]"))?.to_timefn()))
                .collect::<CliResult<Vec<_>>>()?;
            let mut gauge = GaugeSpec::from_gamma(gammas);
            if let Some(u) = umatrix {
                let entries = parse_matrix(u, m, &format!("{path}.umatrix"))?;
                gauge = gauge
                    .with_umatrix(matrix_timefn(entries, m))
                    .at(&format!("{path}.umatrix"))?;
            }
            if let Some(p) = phi {
                gauge = gauge.with_phi(parse_scalar(p, &format!("{path}.phi"))?.to_real_timefn());
            }
            Ok(gauge)
        }
    }
}

/// Inverse temperatures declared by the model, by reservoir.
pub fn model_betas(model: &MasterEquationModel) -> BTreeMap<String, f64> {
    model
        .reservoirs()
        .iter()
        .filter_map(|(k, v)| v.map(|b| (k.clone(), b)))
        .collect()
}
