//! Gauge transformations `L′_μ = U_μν L_ν + γ_μ`, `H′ = H + δĤ` and the
//! group structure they form.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, I, ZERO};
use crate::master_equation::{
    self, MasterEquationModel, Operator, Signature, Snapshot, VALIDATION_TIMES,
};
use crate::timefn::TimeFn;

/// Tolerance of the generator-invariance check, relative to `max(1, ‖𝔏(ρ)‖_F)`.
pub const INVARIANCE_TOL: f64 = 1e-9;
/// Tolerance of `‖U†gU − g‖_F`, relative to `max(1, ‖U‖_F²)`.
pub const PSEUDO_UNITARY_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct GaugeSpec {
    gamma: Vec<TimeFn<Complex64>>,
    umatrix: TimeFn<CMatrix>,
    phi: TimeFn<f64>,
}

/// A gauge evaluated at one instant, with time derivatives.
#[derive(Clone, Debug)]
pub struct GaugeValues {
    pub gamma: Vec<Complex64>,
    pub gamma_dot: Vec<Complex64>,
    pub u: CMatrix,
    pub u_dot: CMatrix,
    pub phi: f64,
    pub phi_dot: f64,
}

impl GaugeSpec {
    pub fn new(
        gamma: Vec<TimeFn<Complex64>>,
        umatrix: TimeFn<CMatrix>,
        phi: TimeFn<f64>,
    ) -> Result<Self> {
        let m = gamma.len();
        let u0 = umatrix.at(0.0);
        if u0.nrows() != m || u0.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: u0.nrows(),
            });
        }
        Ok(Self {
            gamma,
            umatrix,
            phi,
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            gamma: vec![TimeFn::constant(ZERO); m],
            umatrix: TimeFn::constant(linalg::identity(m)),
            phi: TimeFn::constant(0.0),
        }
    }

    /// `U = I`, `φ = 0`.
    pub fn from_gamma(gamma: Vec<TimeFn<Complex64>>) -> Self {
        let m = gamma.len();
        Self {
            gamma,
            umatrix: TimeFn::constant(linalg::identity(m)),
            phi: TimeFn::constant(0.0),
        }
    }

    pub fn constant(gamma: Vec<Complex64>, u: CMatrix, phi: f64) -> Result<Self> {
        Self::new(
            gamma.into_iter().map(TimeFn::constant).collect(),
            TimeFn::constant(u),
            TimeFn::constant(phi),
        )
    }

    pub fn with_phi(mut self, phi: TimeFn<f64>) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_umatrix(mut self, umatrix: TimeFn<CMatrix>) -> Result<Self> {
        let u0 = umatrix.at(0.0);
        if u0.nrows() != self.m() || u0.ncols() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: u0.nrows(),
            });
        }
        self.umatrix = umatrix;
        Ok(self)
    }

    pub fn without_phi(&self) -> Self {
        self.clone().with_phi(TimeFn::constant(0.0))
    }

    pub fn m(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[TimeFn<Complex64>] {
        &self.gamma
    }

    pub fn umatrix(&self) -> &TimeFn<CMatrix> {
        &self.umatrix
    }

    pub fn phi(&self) -> &TimeFn<f64> {
        &self.phi
    }

    pub fn gamma_at(&self, t: f64) -> Vec<Complex64> {
        self.gamma.iter().map(|g| g.at(t)).collect()
    }

    pub fn values(&self, t: f64) -> GaugeValues {
        GaugeValues {
            gamma: self.gamma_at(t),
            gamma_dot: self.gamma.iter().map(|g| g.derivative_at(t)).collect(),
            u: self.umatrix.at(t),
            u_dot: self.umatrix.derivative_at(t),
            phi: self.phi.at(t),
            phi_dot: self.phi.derivative_at(t),
        }
    }

    pub fn pseudo_unitarity_residual(&self, signature: &Signature, t: f64) -> Result<f64> {
        let g = signature.checked_at(t)?;
        let u = self.umatrix.at(t);
        let gm = diag_c(&g);
        let residual = linalg::frobenius(&(u.adjoint() * &gm * &u - &gm));
        Ok(residual / linalg::frobenius(&u).powi(2).max(1.0))
    }

    /// Checks shapes and pseudo-unitarity at each of `times`.
    pub fn validate(&self, signature: &Signature, times: &[f64]) -> Result<()> {
        if signature.len() != self.m() {
            return Err(Error::LengthMismatch {
                what: "gauge",
                expected: signature.len(),
                found: self.m(),
            });
        }
        for &t in times {
            let residual = self.pseudo_unitarity_residual(signature, t)?;
            if residual > PSEUDO_UNITARY_TOL || !residual.is_finite() {
                return Err(Error::PseudoUnitarity { t, residual });
            }
        }
        Ok(())
    }

    /// Group inverse: `(−U⁻¹γ, U⁻¹ = gU†g, −φ)`.
    pub fn inverse(&self, signature: &Signature) -> Self {
        let sig = signature.clone();
        let uinv = {
            let u = self.umatrix.clone();
            let s = sig.clone();
            let ud = self.umatrix.clone();
            let s2 = sig.clone();
            TimeFn::with_derivative(
                move |t| {
                    let g = diag_c(&s.at(t));
                    &g * u.at(t).adjoint() * &g
                },
                move |t| {
                    let g = diag_c(&s2.at(t));
                    &g * ud.derivative_at(t).adjoint() * &g
                },
            )
        };
        let m = self.m();
        let gamma = (0..m)
            .map(|mu| {
                let (u1, u2) = (uinv.clone(), uinv.clone());
                let (g1, g2) = (self.gamma.clone(), self.gamma.clone());
                TimeFn::with_derivative(
                    move |t| {
                        let ui = u1.at(t);
                        -(0..g1.len()).map(|nu| ui[(mu, nu)] * g1[nu].at(t)).sum::<Complex64>()
                    },
                    move |t| {
                        let ui = u2.at(t);
                        let uid = u2.derivative_at(t);
                        -(0..g2.len())
                            .map(|nu| {
                                uid[(mu, nu)] * g2[nu].at(t) + ui[(mu, nu)] * g2[nu].derivative_at(t)
                            })
                            .sum::<Complex64>()
                    },
                )
            })
            .collect();
        let (p1, p2) = (self.phi.clone(), self.phi.clone());
        Self {
            gamma,
            umatrix: uinv,
            phi: TimeFn::with_derivative(move |t| -p1.at(t), move |t| -p2.derivative_at(t)),
        }
    }
}

impl fmt::Debug for GaugeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeSpec").field("m", &self.m()).finish()
    }
}

fn diag_c(g: &[f64]) -> CMatrix {
    linalg::ops::diag(g)
}

/// `Σ_ν U_μν L_ν` for every μ.
fn mixed(u: &CMatrix, ls: &[CMatrix], dim: usize) -> Vec<CMatrix> {
    (0..ls.len())
        .map(|mu| {
            ls.iter()
                .enumerate()
                .fold(linalg::zeros(dim), |acc, (nu, l)| acc + l.map(|z| z * u[(mu, nu)]))
        })
        .collect()
}

/// `Σ_μ (g_μ/2i)(γ*_μ K_μ − γ_μ K_μ†) + φ I` with `K = UL`.
fn delta_h_from(snap: &Snapshot, v: &GaugeValues) -> CMatrix {
    let dim = snap.dim();
    let ks = mixed(&v.u, &snap.lindblads, dim);
    let mut out = linalg::identity(dim).scale(v.phi);
    for ((k, &g), &gam) in ks.iter().zip(&snap.signature).zip(&v.gamma) {
        let term = k.map(|z| z * gam.conj()) - k.adjoint().map(|z| z * gam);
        out += term.map(|z| z * g / (2.0 * I));
    }
    out
}

fn delta_h_dot_from(snap: &Snapshot, dls: &[CMatrix], v: &GaugeValues) -> CMatrix {
    let dim = snap.dim();
    let ks = mixed(&v.u, &snap.lindblads, dim);
    let dks: Vec<CMatrix> = mixed(&v.u_dot, &snap.lindblads, dim)
        .into_iter()
        .zip(mixed(&v.u, dls, dim))
        .map(|(a, b)| a + b)
        .collect();
    let mut out = linalg::identity(dim).scale(v.phi_dot);
    for mu in 0..ks.len() {
        let (k, dk) = (&ks[mu], &dks[mu]);
        let (gam, dgam) = (v.gamma[mu], v.gamma_dot[mu]);
        let term = k.map(|z| z * dgam.conj()) + dk.map(|z| z * gam.conj())
            - k.adjoint().map(|z| z * dgam)
            - dk.adjoint().map(|z| z * gam);
        out += term.map(|z| z * snap.signature[mu] / (2.0 * I));
    }
    out
}

fn check_lengths(gauge: &GaugeSpec, model: &MasterEquationModel) -> Result<()> {
    if gauge.m() != model.num_channels() {
        return Err(Error::LengthMismatch {
            what: "gauge",
            expected: model.num_channels(),
            found: gauge.m(),
        });
    }
    Ok(())
}

pub fn delta_h(gauge: &GaugeSpec, model: &MasterEquationModel, t: f64) -> Result<CMatrix> {
    check_lengths(gauge, model)?;
    Ok(delta_h_from(&model.snapshot(t)?, &gauge.values(t)))
}

/// `∂t δĤ`, assembled from the analytic (or numeric) derivatives of every
/// ingredient.
pub fn delta_h_dot(gauge: &GaugeSpec, model: &MasterEquationModel, t: f64) -> Result<CMatrix> {
    check_lengths(gauge, model)?;
    let dls: Vec<CMatrix> = model
        .channels()
        .iter()
        .map(|ch| ch.lindblad.derivative_at(t))
        .collect();
    Ok(delta_h_dot_from(&model.snapshot(t)?, &dls, &gauge.values(t)))
}

#[derive(Clone, Debug)]
pub struct GaugedModel {
    pub base: MasterEquationModel,
    pub gauge: GaugeSpec,
    pub transformed: MasterEquationModel,
}

impl GaugedModel {
    /// The trivial presentation, `transformed = base`.
    pub fn identity(model: &MasterEquationModel) -> Self {
        Self {
            base: model.clone(),
            gauge: GaugeSpec::identity(model.num_channels()),
            transformed: model.clone(),
        }
    }

    pub fn invariance_residual(&self, t: f64, rho: &CMatrix) -> Result<f64> {
        let l0 = master_equation::liouvillian(&self.base, t, rho)?;
        let l1 = master_equation::liouvillian(&self.transformed, t, rho)?;
        Ok(linalg::frobenius(&(l1 - &l0)) / linalg::frobenius(&l0).max(1.0))
    }

    pub fn delta_h(&self, t: f64) -> Result<CMatrix> {
        delta_h(&self.gauge, &self.base, t)
    }

    pub fn delta_h_dot(&self, t: f64) -> Result<CMatrix> {
        delta_h_dot(&self.gauge, &self.base, t)
    }
}

/// Deterministic full-rank states with coherences, used as invariance probes.
pub fn probe_states(dim: usize) -> Vec<CMatrix> {
    let a = CMatrix::from_fn(dim, dim, |j, k| {
        c((1.0 + j as f64 + 2.0 * k as f64).sin(), (3.0 * j as f64 - k as f64).cos())
    });
    let rho = &a * a.adjoint();
    let tr = linalg::trace(&rho);
    vec![
        master_equation::DensityMatrix::maximally_mixed(dim).into_matrix(),
        rho.map(|z| z / tr),
    ]
}

pub fn apply_gauge(model: &MasterEquationModel, gauge: &GaugeSpec) -> Result<GaugedModel> {
    apply_gauge_on(model, gauge, &VALIDATION_TIMES)
}

/// As [`apply_gauge`], validating pseudo-unitarity and invariance at `times`.
pub fn apply_gauge_on(
    model: &MasterEquationModel,
    gauge: &GaugeSpec,
    times: &[f64],
) -> Result<GaugedModel> {
    check_lengths(gauge, model)?;
    gauge.validate(model.signature(), times)?;
    let dim = model.dim();

    let (b1, g1, b2, g2) = (model.clone(), gauge.clone(), model.clone(), gauge.clone());
    let delta = Operator::with_derivative(
        dim,
        "dH",
        move |t| delta_h(&g1, &b1, t).expect("gauge lengths validated"),
        move |t| delta_h_dot(&g2, &b2, t).expect("gauge lengths validated"),
    );
    let hamiltonian = Operator::sum(
        format!("{}'", model.hamiltonian().label()),
        vec![model.hamiltonian().clone(), delta],
    )?;

    let lindblads = model
        .channels()
        .iter()
        .enumerate()
        .map(|(mu, ch)| {
            let channels: Arc<Vec<Operator>> =
                Arc::new(model.channels().iter().map(|c| c.lindblad.clone()).collect());
            let (cs1, cs2) = (channels.clone(), channels);
            let (g1, g2) = (gauge.clone(), gauge.clone());
            Operator::with_derivative(
                dim,
                format!("{}'", ch.lindblad.label()),
                move |t| {
                    let u = g1.umatrix.at(t);
                    let mut out = linalg::identity(dim).map(|z| z * g1.gamma[mu].at(t));
                    for (nu, l) in cs1.iter().enumerate() {
                        out += l.at(t).map(|z| z * u[(mu, nu)]);
                    }
                    out
                },
                move |t| {
                    let u = g2.umatrix.at(t);
                    let ud = g2.umatrix.derivative_at(t);
                    let mut out = linalg::identity(dim).map(|z| z * g2.gamma[mu].derivative_at(t));
                    for (nu, l) in cs2.iter().enumerate() {
                        out += l.at(t).map(|z| z * ud[(mu, nu)])
                            + l.derivative_at(t).map(|z| z * u[(mu, nu)]);
                    }
                    out
                },
            )
        })
        .collect();

    let transformed = model.with_operators(hamiltonian, lindblads)?;
    let gm = GaugedModel {
        base: model.clone(),
        gauge: gauge.clone(),
        transformed,
    };
    let probes = probe_states(dim);
    for &t in times {
        for rho in &probes {
            let residual = gm.invariance_residual(t, rho)?;
            if residual > INVARIANCE_TOL || !residual.is_finite() {
                return Err(Error::GaugeInvariance { residual });
            }
        }
    }
    Ok(gm)
}

/// Group product: applying the result equals applying `inner` then `outer`.
pub fn compose(outer: &GaugeSpec, inner: &GaugeSpec, signature: &Signature) -> Result<GaugeSpec> {
    let m = outer.m();
    if inner.m() != m || signature.len() != m {
        return Err(Error::LengthMismatch {
            what: "gauge composition",
            expected: m,
            found: if inner.m() != m {
                inner.m()
            } else {
                signature.len()
            },
        });
    }
    let gamma = (0..m)
        .map(|mu| {
            let (o1, i1, o2, i2) = (outer.clone(), inner.clone(), outer.clone(), inner.clone());
            TimeFn::with_derivative(
                move |t| {
                    let u = o1.umatrix.at(t);
                    o1.gamma[mu].at(t)
                        + (0..m).map(|nu| u[(mu, nu)] * i1.gamma[nu].at(t)).sum::<Complex64>()
                },
                move |t| {
                    let u = o2.umatrix.at(t);
                    let ud = o2.umatrix.derivative_at(t);
                    o2.gamma[mu].derivative_at(t)
                        + (0..m)
                            .map(|nu| {
                                ud[(mu, nu)] * i2.gamma[nu].at(t)
                                    + u[(mu, nu)] * i2.gamma[nu].derivative_at(t)
                            })
                            .sum::<Complex64>()
                },
            )
        })
        .collect();

    let (o1, i1, o2, i2) = (outer.clone(), inner.clone(), outer.clone(), inner.clone());
    let umatrix = TimeFn::with_derivative(
        move |t| o1.umatrix.at(t) * i1.umatrix.at(t),
        move |t| {
            o2.umatrix.derivative_at(t) * i2.umatrix.at(t)
                + o2.umatrix.at(t) * i2.umatrix.derivative_at(t)
        },
    );

    let (o1, i1, s1) = (outer.clone(), inner.clone(), signature.clone());
    let (o2, i2, s2) = (outer.clone(), inner.clone(), signature.clone());
    let phi = TimeFn::with_derivative(
        move |t| {
            let (vo, vi) = (o1.values(t), i1.values(t));
            vi.phi + vo.phi + cross_phase(&vo.gamma, &s1.at(t), &vo.u, &vi.gamma).im
        },
        move |t| {
            let (vo, vi) = (o2.values(t), i2.values(t));
            let g = s2.at(t);
            let d = cross_phase(&vo.gamma_dot, &g, &vo.u, &vi.gamma)
                + cross_phase(&vo.gamma, &g, &vo.u_dot, &vi.gamma)
                + cross_phase(&vo.gamma, &g, &vo.u, &vi.gamma_dot);
            vi.phi_dot + vo.phi_dot + d.im
        },
    );
    GaugeSpec::new(gamma, umatrix, phi)
}

/// `Σ_μν a*_μ g_μ U_μν b_ν`
fn cross_phase(a: &[Complex64], g: &[f64], u: &CMatrix, b: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for mu in 0..a.len() {
        let ub: Complex64 = (0..b.len()).map(|nu| u[(mu, nu)] * b[nu]).sum();
        acc += a[mu].conj() * g[mu] * ub;
    }
    acc
}

/// Piecewise cubic Hermite interpolant of a stored trajectory, using the
/// generator at each node for the slopes.
#[derive(Clone, Debug)]
pub struct TrajectoryContext {
    times: Vec<f64>,
    states: Vec<CMatrix>,
    rates: Vec<CMatrix>,
}

impl TrajectoryContext {
    pub fn new(model: &MasterEquationModel, times: Vec<f64>, states: Vec<CMatrix>) -> Result<Self> {
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::Grid(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("times must be strictly increasing".into()));
        }
        let rates = times
            .iter()
            .zip(&states)
            .map(|(&t, rho)| master_equation::liouvillian(model, t, rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times,
            states,
            rates,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    fn segment(&self, t: f64) -> (usize, f64, f64) {
        let n = self.times.len();
        let k = self.times.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let h = self.times[k + 1] - self.times[k];
        (k, h, (t - self.times[k]) / h)
    }

    pub fn rho_at(&self, t: f64) -> CMatrix {
        let (k, h, s) = self.segment(t);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.states[k].scale(h00)
            + self.rates[k].scale(h * h10)
            + self.states[k + 1].scale(h01)
            + self.rates[k + 1].scale(h * h11)
    }

    pub fn rho_dot_at(&self, t: f64) -> CMatrix {
        let (k, h, s) = self.segment(t);
        let s2 = s * s;
        let d00 = 6.0 * s2 - 6.0 * s;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -6.0 * s2 + 6.0 * s;
        let d11 = 3.0 * s2 - 2.0 * s;
        (self.states[k].scale(d00) + self.states[k + 1].scale(d01)).unscale(h)
            + self.rates[k].scale(d10)
            + self.rates[k + 1].scale(d11)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    EnergyPreserving,
    PowerPreserving,
    CurrentPreserving,
    MinimalDissipation,
}

impl FromStr for PresetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "energy_preserving" => PresetKind::EnergyPreserving,
            "power_preserving" => PresetKind::PowerPreserving,
            "current_preserving" => PresetKind::CurrentPreserving,
            "minimal_dissipation" => PresetKind::MinimalDissipation,
            other => return Err(Error::InvalidParams(format!("unknown preset {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct PresetOptions {
    /// Seed direction for `current_preserving`; defaults to the first basis vector.
    pub seed: Option<Vec<Complex64>>,
    /// `(γ, U)` whose power is compensated by `power_preserving`; defaults to
    /// `γ = seed`, `U = I`.
    pub base_gauge: Option<GaugeSpec>,
}

fn require_context(
    ctx: Option<&TrajectoryContext>,
    kind: PresetKind,
) -> Result<&TrajectoryContext> {
    ctx.ok_or_else(|| Error::MissingContext(format!("{kind:?} needs ρ(t)")))
}

fn seed_vector(opts: &PresetOptions, m: usize) -> Result<Vec<Complex64>> {
    match &opts.seed {
        Some(s) if s.len() != m => Err(Error::LengthMismatch {
            what: "preset seed",
            expected: m,
            found: s.len(),
        }),
        Some(s) => Ok(s.clone()),
        None => {
            let mut e = vec![ZERO; m];
            if m > 0 {
                e[0] = c(1.0, 0.0);
            }
            Ok(e)
        }
    }
}

pub fn preset_gauge(
    kind: PresetKind,
    model: &MasterEquationModel,
    ctx: Option<&TrajectoryContext>,
    opts: &PresetOptions,
) -> Result<GaugeSpec> {
    let m = model.num_channels();
    match kind {
        PresetKind::MinimalDissipation => {
            let dim = model.dim() as f64;
            let gamma = model
                .channels()
                .iter()
                .map(|ch| {
                    let (l1, l2) = (ch.lindblad.clone(), ch.lindblad.clone());
                    TimeFn::with_derivative(
                        move |t| -linalg::trace(&l1.at(t)) / dim,
                        move |t| -linalg::trace(&l2.derivative_at(t)) / dim,
                    )
                })
                .collect();
            Ok(GaugeSpec::from_gamma(gamma))
        }
        PresetKind::EnergyPreserving => {
            let ctx = Arc::new(require_context(ctx, kind)?.clone());
            let gamma = model
                .channels()
                .iter()
                .map(|ch| {
                    let (l1, l2) = (ch.lindblad.clone(), ch.lindblad.clone());
                    let (c1, c2) = (ctx.clone(), ctx.clone());
                    TimeFn::with_derivative(
                        move |t| linalg::trace_product(&l1.at(t), &c1.rho_at(t)),
                        move |t| {
                            linalg::trace_product(&l2.derivative_at(t), &c2.rho_at(t))
                                + linalg::trace_product(&l2.at(t), &c2.rho_dot_at(t))
                        },
                    )
                })
                .collect();
            Ok(GaugeSpec::from_gamma(gamma))
        }
        PresetKind::PowerPreserving => {
            let ctx = require_context(ctx, kind)?;
            let base = match &opts.base_gauge {
                Some(g) => g.without_phi(),
                None => GaugeSpec::constant(seed_vector(opts, m)?, linalg::identity(m), 0.0)?,
            };
            check_lengths(&base, model)?;
            let rate = {
                let (b, mdl, cx) = (base.clone(), model.clone(), ctx.clone());
                Arc::new(move |t: f64| -> f64 {
                    let xd = delta_h_dot(&b, &mdl, t).expect("gauge lengths validated");
                    -linalg::trace_product(&xd, &cx.rho_at(t)).re
                })
            };
            let phi = cumulative_integral(ctx.times(), rate);
            Ok(base.with_phi(phi))
        }
        PresetKind::CurrentPreserving => {
            let ctx = Arc::new(require_context(ctx, kind)?.clone());
            let seed = seed_vector(opts, m)?;
            let mdl = model.clone();
            let cx = ctx.clone();
            let projected = Arc::new(move |t: f64| -> Vec<Complex64> {
                let snap = mdl.snapshot(t).expect("model validated");
                let rd = cx.rho_dot_at(t);
                let w: Vec<Complex64> = snap
                    .lindblads
                    .iter()
                    .zip(&snap.signature)
                    .map(|(l, &g)| linalg::trace_product(l, &rd) * g)
                    .collect();
                let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
                if ww < 1e-300 {
                    return seed.clone();
                }
                let ws: Complex64 = w.iter().zip(&seed).map(|(a, b)| a.conj() * b).sum();
                seed.iter()
                    .zip(&w)
                    .map(|(s, wk)| s - wk * (ws / ww))
                    .collect()
            });
            let gamma: Vec<TimeFn<Complex64>> = (0..m)
                .map(|mu| {
                    let p = projected.clone();
                    TimeFn::new(move |t| p(t)[mu])
                })
                .collect();
            let base = GaugeSpec::from_gamma(gamma);
            let (b1, m1, c1) = (base.clone(), model.clone(), ctx.clone());
            let (b2, m2, c2) = (base.clone(), model.clone(), ctx);
            let phi = TimeFn::with_derivative(
                move |t| {
                    let x = delta_h(&b1, &m1, t).expect("gauge lengths validated");
                    -linalg::trace_product(&x, &c1.rho_at(t)).re
                },
                move |t| {
                    let x = delta_h(&b2, &m2, t).expect("gauge lengths validated");
                    let xd = delta_h_dot(&b2, &m2, t).expect("gauge lengths validated");
                    -(linalg::trace_product(&xd, &c2.rho_at(t))
                        + linalg::trace_product(&x, &c2.rho_dot_at(t)))
                    .re
                },
            );
            Ok(base.with_phi(phi))
        }
    }
}

/// `F(t) = ∫_{t_0}^t f`, Simpson per grid interval with a midpoint sample;
/// `F′ = f` is attached analytically.
fn cumulative_integral(grid: &[f64], f: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> TimeFn<f64> {
    let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    };
    let mut nodes = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    nodes.push(0.0);
    for w in grid.windows(2) {
        acc += simpson(f.as_ref(), w[0], w[1]);
        nodes.push(acc);
    }
    let grid = grid.to_vec();
    let fv = f.clone();
    TimeFn::with_derivative(
        move |t| {
            let k = grid.partition_point(|&x| x <= t).clamp(1, grid.len()) - 1;
            nodes[k] + simpson(fv.as_ref(), grid[k], t)
        },
        move |t| f(t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ops::*;
    use crate::linalg::identity;
    use crate::master_equation::{Channel, DensityMatrix};
    use std::collections::BTreeMap;

    fn two_channel_model() -> MasterEquationModel {
        let h = Operator::scaled(
            "H",
            pauli_z().scale(0.5) + pauli_x().scale(0.3),
            TimeFn::with_derivative(|t: f64| c(1.0 + 0.2 * t.sin(), 0.0), |t: f64| c(0.2 * t.cos(), 0.0)),
        );
        let l1 = Operator::constant("a", sigma_minus().scale(0.8) + identity(2).scale(0.1));
        let l2 = Operator::scaled(
            "b",
            sigma_plus().scale(0.4) + pauli_z().scale(0.2),
            TimeFn::with_derivative(|t: f64| c(t.cos(), 0.3), |t: f64| c(-t.sin(), 0.0)),
        );
        let mut res = BTreeMap::new();
        res.insert("hot".to_string(), Some(0.5));
        res.insert("cold".to_string(), Some(1.0));
        MasterEquationModel::new(
            h,
            vec![Channel::new(l1, "hot"), Channel::new(l2, "cold")],
            Signature::constant(vec![1.0, -1.0]).unwrap(),
            res,
        )
        .unwrap()
    }

    fn boost(theta: f64, phase: f64) -> CMatrix {
        // pseudo-unitary for g = diag(1, −1)
        let (ch, sh) = (theta.cosh(), theta.sinh());
        CMatrix::from_row_slice(
            2,
            2,
            &[c(ch, 0.0), c(0.0, phase).exp() * sh, c(0.0, -phase).exp() * sh, c(ch, 0.0)],
        )
    }

    fn sample_gauge() -> GaugeSpec {
        GaugeSpec::new(
            vec![
                TimeFn::with_derivative(|t: f64| c(0.3 * t.sin(), 0.1), |t: f64| c(0.3 * t.cos(), 0.0)),
                TimeFn::constant(c(-0.2, 0.4)),
            ],
            TimeFn::with_derivative(
                |t: f64| boost(0.3 * t.cos(), 0.7),
                |t: f64| {
                    let th = 0.3 * t.cos();
                    let dth = -0.3 * t.sin();
                    CMatrix::from_row_slice(
                        2,
                        2,
                        &[
                            c(th.sinh() * dth, 0.0),
                            c(0.0, 0.7).exp() * th.cosh() * dth,
                            c(0.0, -0.7).exp() * th.cosh() * dth,
                            c(th.sinh() * dth, 0.0),
                        ],
                    )
                },
            ),
            TimeFn::with_derivative(|t: f64| 0.5 * t, |_| 0.5),
        )
        .unwrap()
    }

    #[test]
    fn delta_h_trivial_cases() {
        let model = two_channel_model();
        let id = GaugeSpec::identity(2);
        assert!(linalg::frobenius(&delta_h(&id, &model, 0.4).unwrap()) == 0.0);
        let phase = GaugeSpec::constant(vec![ZERO; 2], linalg::identity(2), 1.5).unwrap();
        let dh = delta_h(&phase, &model, 0.4).unwrap();
        assert!(linalg::frobenius(&(dh - identity(2).scale(1.5))) < 1e-15);
    }

    #[test]
    fn generic_gauge_preserves_generator() {
        let model = two_channel_model();
        let gm = apply_gauge(&model, &sample_gauge()).unwrap();
        for &t in &[0.1, 0.9, 2.2] {
            for rho in probe_states(2) {
                assert!(gm.invariance_residual(t, &rho).unwrap() < 1e-12);
            }
            let dh = gm.delta_h(t).unwrap();
            assert!(linalg::hermiticity_residual(&dh) < 1e-12);
        }
    }

    #[test]
    fn delta_h_dot_matches_finite_difference() {
        let model = two_channel_model();
        let g = sample_gauge();
        for &t in &[0.3, 1.7] {
            let an = delta_h_dot(&g, &model, t).unwrap();
            let h = 1e-5;
            let fd = (delta_h(&g, &model, t + h).unwrap() - delta_h(&g, &model, t - h).unwrap())
                .unscale(2.0 * h);
            assert!(linalg::frobenius(&(an - fd)) < 1e-8);
        }
    }

    #[test]
    fn non_pseudo_unitary_matrix_is_rejected() {
        let model = two_channel_model();
        let bad = GaugeSpec::constant(vec![ZERO; 2], pauli_x().scale(2.0), 0.0).unwrap();
        assert!(matches!(
            apply_gauge(&model, &bad),
            Err(Error::PseudoUnitarity { .. })
        ));
        // the boost is pseudo-unitary for diag(1,−1) but not for diag(1,1)
        let b = GaugeSpec::constant(vec![ZERO; 2], boost(0.5, 0.0), 0.0).unwrap();
        assert!(b.validate(&Signature::positive(2), &[0.0]).is_err());
        assert!(b.validate(model.signature(), &[0.0]).is_ok());
    }

    #[test]
    fn composition_matches_sequential_application() {
        let model = two_channel_model();
        let g1 = sample_gauge();
        let g2 = GaugeSpec::constant(vec![c(0.1, -0.3), c(0.05, 0.2)], boost(-0.4, 1.1), -0.2)
            .unwrap();
        let composed = compose(&g2, &g1, model.signature()).unwrap();
        let once = apply_gauge(&model, &composed).unwrap();
        let twice = apply_gauge(&apply_gauge(&model, &g1).unwrap().transformed, &g2).unwrap();
        for &t in &[0.0, 1.3] {
            let a = once.transformed.snapshot(t).unwrap();
            let b = twice.transformed.snapshot(t).unwrap();
            assert!(linalg::frobenius(&(a.hamiltonian - b.hamiltonian)) < 1e-12);
            for (x, y) in a.lindblads.iter().zip(&b.lindblads) {
                assert!(linalg::frobenius(&(x - y)) < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let model = two_channel_model();
        let g = sample_gauge();
        let id = compose(&g.inverse(model.signature()), &g, model.signature()).unwrap();
        for &t in &[0.2, 2.5] {
            let v = id.values(t);
            assert!(v.gamma.iter().all(|z| z.norm() < 1e-14));
            assert!(linalg::frobenius(&(v.u - identity(2))) < 1e-13);
            assert!(v.phi.abs() < 1e-14);
        }
    }

    #[test]
    fn identity_is_neutral_in_composition() {
        let model = two_channel_model();
        let g = sample_gauge();
        let left = compose(&GaugeSpec::identity(2), &g, model.signature()).unwrap();
        for &t in &[0.4, 3.0] {
            let (a, b) = (left.values(t), g.values(t));
            for (x, y) in a.gamma.iter().zip(&b.gamma) {
                assert!((x - y).norm() <= 1e-14);
            }
            assert!(linalg::frobenius(&(a.u - b.u)) <= 1e-14);
            assert!((a.phi - b.phi).abs() <= 1e-14);
        }
    }

    #[test]
    fn minimal_dissipation_makes_channels_traceless() {
        let model = two_channel_model();
        let g = preset_gauge(PresetKind::MinimalDissipation, &model, None, &Default::default())
            .unwrap();
        let gm = apply_gauge(&model, &g).unwrap();
        for l in gm.transformed.snapshot(0.7).unwrap().lindblads {
            assert!(linalg::trace(&l).norm() < 1e-15);
        }
    }

    #[test]
    fn context_presets_require_a_trajectory() {
        let model = two_channel_model();
        for kind in [
            PresetKind::EnergyPreserving,
            PresetKind::PowerPreserving,
            PresetKind::CurrentPreserving,
        ] {
            assert!(matches!(
                preset_gauge(kind, &model, None, &Default::default()),
                Err(Error::MissingContext(_))
            ));
        }
    }

    #[test]
    fn hermite_context_reproduces_nodes() {
        let model = two_channel_model();
        let rho = DensityMatrix::maximally_mixed(2).into_matrix();
        let ctx = TrajectoryContext::new(&model, vec![0.0, 0.5], vec![rho.clone(), rho.clone()])
            .unwrap();
        assert!(linalg::frobenius(&(ctx.rho_at(0.0) - &rho)) < 1e-15);
        assert!(linalg::frobenius(&(ctx.rho_at(0.5) - &rho)) < 1e-15);
    }
}
