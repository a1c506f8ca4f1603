//! Currents, power, gauge-induced terms and the invariance conditions.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::{self, GaugeSpec, GaugedModel};
use crate::linalg::{self, trace_product, CMatrix};
use crate::master_equation::{DensityMatrix, MasterEquationModel, Operator, Snapshot, UNTAGGED};
use crate::path;
use crate::timefn::fd_step;

/// Relative tolerance of the two-way cross-checks.
pub const CROSS_CHECK_TOL: f64 = 1e-9;
/// Imaginary parts above this (relative) are treated as a bug.
const IMAG_TOL: f64 = 1e-10;

fn check_dim(model: &MasterEquationModel, rho: &CMatrix) -> Result<()> {
    if rho.nrows() != model.dim() || rho.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: rho.nrows(),
        });
    }
    Ok(())
}

fn real_part(z: Complex64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: format!("imaginary part of {what}"),
            discrepancy: z.im.abs(),
        });
    }
    Ok(z.re)
}

/// `𝒥_μ = −g_μ Re⟨L_μ†[L_μ, H]⟩` for every channel.
pub fn channel_currents_of(snap: &Snapshot, rho: &CMatrix) -> Vec<f64> {
    let h = &snap.hamiltonian;
    snap.lindblads
        .iter()
        .zip(&snap.signature)
        .map(|(l, &g)| {
            let comm = l * h - h * l;
            -g * trace_product(&(l.adjoint() * comm), rho).re
        })
        .collect()
}

/// `Tr(H 𝔇(ρ))`
fn dissipative_current(snap: &Snapshot, rho: &CMatrix) -> Result<f64> {
    real_part(
        trace_product(&snap.hamiltonian, &snap.dissipator(rho)),
        "current",
    )
}

pub fn total_current(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<f64> {
    check_dim(model, rho)?;
    let snap = model.snapshot(t)?;
    let j = dissipative_current(&snap, rho)?;
    let sum: f64 = channel_currents_of(&snap, rho).iter().sum();
    let discrepancy = (j - sum).abs();
    if discrepancy > 1e-10 * j.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "current decomposition".into(),
            discrepancy,
        });
    }
    Ok(j)
}

pub fn channel_current(
    model: &MasterEquationModel,
    mu: usize,
    t: f64,
    rho: &CMatrix,
) -> Result<f64> {
    check_dim(model, rho)?;
    if mu >= model.num_channels() {
        return Err(Error::IndexOutOfRange {
            index: mu,
            len: model.num_channels(),
        });
    }
    Ok(channel_currents_of(&model.snapshot(t)?, rho)[mu])
}

/// Channel currents summed per reservoir tag; untagged channels are left out.
pub fn reservoir_currents(model: &MasterEquationModel, currents: &[f64]) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = model
        .reservoirs()
        .keys()
        .map(|k| (k.clone(), 0.0))
        .collect();
    for (ch, j) in model.channels().iter().zip(currents) {
        if ch.reservoir != UNTAGGED {
            *out.entry(ch.reservoir.clone()).or_insert(0.0) += j;
        }
    }
    out
}

/// `⟨∂t H⟩`
pub fn power(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<f64> {
    check_dim(model, rho)?;
    real_part(
        trace_product(&model.hamiltonian().derivative_at(t), rho),
        "power",
    )
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GaugeTerms {
    /// `Tr(δĤ 𝔇(ρ))`
    pub j_delta_h: f64,
    /// `Tr(δĤ 𝔘(ρ))`
    pub c_delta_h: f64,
    /// `⟨∂t δĤ⟩`
    pub power_delta_h: f64,
}

pub fn gauge_terms(
    model: &MasterEquationModel,
    gauge: &GaugeSpec,
    t: f64,
    rho: &CMatrix,
) -> Result<GaugeTerms> {
    check_dim(model, rho)?;
    let dh = gauge::delta_h(gauge, model, t)?;
    let dh_dot = gauge::delta_h_dot(gauge, model, t)?;
    let snap = model.snapshot(t)?;
    gauge_terms_from(&snap, &dh, &dh_dot, rho)
}

fn gauge_terms_from(
    snap: &Snapshot,
    dh: &CMatrix,
    dh_dot: &CMatrix,
    rho: &CMatrix,
) -> Result<GaugeTerms> {
    let d = snap.dissipator(rho);
    let u = snap.unitary(rho);
    let terms = GaugeTerms {
        j_delta_h: real_part(trace_product(dh, &d), "J_dH")?,
        c_delta_h: real_part(trace_product(dh, &u), "C_dH")?,
        power_delta_h: real_part(trace_product(dh_dot, rho), "P_dH")?,
    };
    let whole = trace_product(dh, &(d + u)).re;
    let discrepancy = (whole - terms.j_delta_h - terms.c_delta_h).abs();
    if discrepancy > 1e-10 * whole.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "Tr(dH drho) split".into(),
            discrepancy,
        });
    }
    Ok(terms)
}

/// Thermodynamic quantities of the transformed presentation at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ThermoSample {
    pub t: f64,
    /// `⟨H′⟩`
    pub energy: f64,
    /// `𝒥′`
    pub total_current: f64,
    /// `𝒥′_μ`
    pub channel_currents: Vec<f64>,
    pub reservoir_currents: BTreeMap<String, f64>,
    /// `𝒫′`
    pub power: f64,
    pub j_delta_h: f64,
    pub c_delta_h: f64,
    pub power_delta_h: f64,
    /// `|d⟨H′⟩/dt − 𝒥′ − 𝒫′|`
    pub first_law_residual: f64,
}

/// Evaluates the transformed quantities directly and through the base
/// presentation, failing when the two disagree.
pub fn thermo_sample(gm: &GaugedModel, t: f64, rho: &CMatrix) -> Result<ThermoSample> {
    let base = &gm.base;
    let tr = &gm.transformed;
    check_dim(base, rho)?;

    let snap0 = base.snapshot(t)?;
    let snap1 = tr.snapshot(t)?;
    let currents = channel_currents_of(&snap1, rho);
    let j1 = dissipative_current(&snap1, rho)?;
    let sum: f64 = currents.iter().sum();
    let scale = j1.abs().max(1.0);
    if (j1 - sum).abs() > 1e-10 * scale {
        return Err(Error::CrossCheck {
            what: "current decomposition".into(),
            discrepancy: (j1 - sum).abs(),
        });
    }
    let h1_dot = tr.hamiltonian().derivative_at(t);
    let p1 = real_part(trace_product(&h1_dot, rho), "power")?;

    let j0 = dissipative_current(&snap0, rho)?;
    let p0 = real_part(
        trace_product(&base.hamiltonian().derivative_at(t), rho),
        "power",
    )?;
    let dh = &snap1.hamiltonian - &snap0.hamiltonian;
    let dh_dot = gm.delta_h_dot(t)?;
    let terms = gauge_terms_from(&snap0, &dh, &dh_dot, rho)?;

    let dj = (j1 - (j0 + terms.j_delta_h + terms.c_delta_h)).abs();
    if dj > CROSS_CHECK_TOL * scale {
        return Err(Error::CrossCheck {
            what: "transformed current".into(),
            discrepancy: dj,
        });
    }
    let dp = (p1 - (p0 + terms.power_delta_h)).abs();
    if dp > CROSS_CHECK_TOL * p1.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "transformed power".into(),
            discrepancy: dp,
        });
    }

    let energy = real_part(trace_product(&snap1.hamiltonian, rho), "energy")?;
    let h = fd_step(t);
    let energy_at = |s: f64| -> Result<f64> {
        let r = path::rk4(base, t, s - t, rho)?;
        Ok(trace_product(&tr.hamiltonian().at(s), &r).re)
    };
    let de_dt = (energy_at(t + h)? - energy_at(t - h)?) / (2.0 * h);

    Ok(ThermoSample {
        t,
        energy,
        total_current: j1,
        reservoir_currents: reservoir_currents(tr, &currents),
        channel_currents: currents,
        power: p1,
        j_delta_h: terms.j_delta_h,
        c_delta_h: terms.c_delta_h,
        power_delta_h: terms.power_delta_h,
        first_law_residual: (de_dt - j1 - p1).abs(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub t: f64,
    /// `None` when no candidate gauge was supplied.
    pub dphi_dt: Option<f64>,
    pub mean_l: Vec<Complex64>,
    pub mean_dl: Vec<Complex64>,
    pub tol: f64,
    pub invariant: bool,
}

pub fn invariance_report(
    model: &MasterEquationModel,
    t: f64,
    rho: &CMatrix,
    tol: f64,
    gauge: Option<&GaugeSpec>,
) -> Result<InvarianceReport> {
    check_dim(model, rho)?;
    let mean_l: Vec<Complex64> = model
        .channels()
        .iter()
        .map(|c| trace_product(&c.lindblad.at(t), rho))
        .collect();
    let mean_dl: Vec<Complex64> = model
        .channels()
        .iter()
        .map(|c| trace_product(&c.lindblad.derivative_at(t), rho))
        .collect();
    let dphi_dt = gauge.map(|g| g.phi().derivative_at(t));
    let invariant = mean_l.iter().chain(&mean_dl).all(|z| z.norm() <= tol)
        && dphi_dt.is_none_or(|d| d.abs() <= tol);
    Ok(InvarianceReport {
        t,
        dphi_dt,
        mean_l,
        mean_dl,
        tol,
        invariant,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QdbcReport {
    /// `‖[H_S, H]‖_F`
    pub commutes_a: f64,
    /// `‖[A_μ, H_S] − ω_μ A_μ‖_F`; partners use `−ω_μ`.
    pub eigenoperator_b: Vec<f64>,
    /// `‖A_{μ+n} − e^{−βω_μ/2} A_μ†‖_F`
    pub pairing_c: Vec<f64>,
    pub gibbs_fixed_point_residual: f64,
    pub mean_a_at_gibbs: Vec<Complex64>,
    pub gibbs: CMatrix,
}

impl QdbcReport {
    pub fn max_condition_residual(&self) -> f64 {
        self.eigenoperator_b
            .iter()
            .chain(&self.pairing_c)
            .fold(self.commutes_a, |a, &b| a.max(b))
    }
}

/// Channels must come as `n` primary operators followed by their `n` partners.
pub fn qdbc_check(
    model: &MasterEquationModel,
    h_s: &Operator,
    beta: f64,
    omegas: &[f64],
) -> Result<QdbcReport> {
    if omegas.contains(&0.0) {
        return Err(Error::Precondition(
            "detailed balance requires non-null Bohr frequencies".into(),
        ));
    }
    let m = model.num_channels();
    if !m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "detailed balance pairs channels; got {m}"
        )));
    }
    let n = m / 2;
    if omegas.len() != n {
        return Err(Error::LengthMismatch {
            what: "Bohr frequencies",
            expected: n,
            found: omegas.len(),
        });
    }
    if !model.is_autonomous() {
        return Err(Error::Precondition(
            "detailed balance check needs an autonomous model".into(),
        ));
    }
    let t = 0.0;
    let snap = model.snapshot(t)?;
    let hs = h_s.at(t);
    if hs.nrows() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: hs.nrows(),
        });
    }
    let commutes_a = linalg::frobenius(&(&hs * &snap.hamiltonian - &snap.hamiltonian * &hs));
    let eigenoperator_b = snap
        .lindblads
        .iter()
        .enumerate()
        .map(|(mu, a)| {
            let w = if mu < n { omegas[mu] } else { -omegas[mu - n] };
            linalg::frobenius(&(a * &hs - &hs * a - a.scale(w)))
        })
        .collect();
    let pairing_c = (0..n)
        .map(|mu| {
            let weight = (-beta * omegas[mu] / 2.0).exp();
            linalg::frobenius(&(&snap.lindblads[mu + n] - snap.lindblads[mu].adjoint().scale(weight)))
        })
        .collect();
    let gibbs = DensityMatrix::gibbs(&hs, beta)?.into_matrix();
    let gibbs_fixed_point_residual = linalg::frobenius(&snap.liouvillian(&gibbs));
    let mean_a_at_gibbs = snap
        .lindblads
        .iter()
        .map(|a| trace_product(a, &gibbs))
        .collect();
    Ok(QdbcReport {
        commutes_a,
        eigenoperator_b,
        pairing_c,
        gibbs_fixed_point_residual,
        mean_a_at_gibbs,
        gibbs,
    })
}
