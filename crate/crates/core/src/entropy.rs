//! Von Neumann entropy, relative entropy and entropy-production rates.

use crate::error::{Error, Result};
use crate::gauge::GaugedModel;
use crate::linalg::{self, trace_product, CMatrix, LOG_CLAMP};
use crate::master_equation::MasterEquationModel;
use crate::thermo;

/// Soft lower bound for `Σ`; clamping noise near pure states.
pub const SIGMA_SLACK: f64 = -1e-9;

/// `−Σ λ ln λ` with eigenvalues clamped at [`LOG_CLAMP`] inside the logarithm.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    let eig = linalg::eig_hermitian(rho)?;
    Ok(-eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0) * l.max(LOG_CLAMP).ln())
        .sum::<f64>())
}

/// `∂t 𝒮 = −Tr(ln ρ 𝔏(ρ))`, cross-checked against `Σ g Re⟨L†[L, ln ρ]⟩`.
pub fn entropy_rate(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<f64> {
    let eig = linalg::eig_hermitian(rho)?;
    if eig.min() <= LOG_CLAMP {
        return Err(Error::RankDeficient);
    }
    let ln_rho = eig.map(f64::ln);
    let snap = model.snapshot(t)?;
    let rate = -trace_product(&ln_rho, &snap.liouvillian(rho)).re;
    let alt: f64 = snap
        .lindblads
        .iter()
        .zip(&snap.signature)
        .map(|(l, &g)| {
            let comm = l * &ln_rho - &ln_rho * l;
            g * trace_product(&(l.adjoint() * comm), rho).re
        })
        .sum();
    let discrepancy = (rate - alt).abs();
    if discrepancy > 1e-9 * rate.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "entropy rate".into(),
            discrepancy,
        });
    }
    Ok(rate)
}

/// `S(ρ|σ) = Tr ρ (ln ρ − ln σ)`
pub fn relative_entropy(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let es = linalg::eig_hermitian(sigma)?;
    for (k, &l) in es.eigenvalues.iter().enumerate() {
        if l < LOG_CLAMP {
            let v = es.eigenvectors.column(k);
            let weight = (v.adjoint() * rho * v)[(0, 0)].re;
            if weight > 1e-10 {
                return Err(Error::SupportViolation);
            }
        }
    }
    let ln_sigma = es.map(|l| l.max(LOG_CLAMP).ln());
    let s_rho = von_neumann_entropy(rho)?;
    Ok(-s_rho - trace_product(rho, &ln_sigma).re)
}

/// `Σ = S(ρ_0|ρ_⋆) − S(ρ_t|ρ_⋆)`
pub fn ep_sigma(rho0: &CMatrix, rho_t: &CMatrix, rho_star: &CMatrix) -> Result<f64> {
    let sigma = relative_entropy(rho0, rho_star)? - relative_entropy(rho_t, rho_star)?;
    if sigma < SIGMA_SLACK {
        log::warn!("entropy production {sigma:.3e} is negative");
    }
    Ok(sigma)
}

/// `ℰ = ∂t𝒮 + Tr(𝔏(ρ) ln ρ_⋆)`
pub fn ep_rate(
    model: &MasterEquationModel,
    t: f64,
    rho: &CMatrix,
    rho_star: &CMatrix,
) -> Result<f64> {
    let es = linalg::eig_hermitian(rho_star)?;
    if es.min() < LOG_CLAMP {
        return Err(Error::SupportViolation);
    }
    let ln_star = es.map(f64::ln);
    let l = crate::master_equation::liouvillian(model, t, rho)?;
    Ok(entropy_rate(model, t, rho)? + trace_product(&l, &ln_star).re)
}

/// `ℰ̃′ = ∂t𝒮 − β𝒥′` on the transformed presentation, checked against
/// `ℰ̃ − β(𝒥_δH + 𝒞_δH)`.
pub fn thermal_ep_rate(gm: &GaugedModel, t: f64, rho: &CMatrix, beta: f64) -> Result<f64> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParams(format!("inverse temperature {beta}")));
    }
    let ds = entropy_rate(&gm.base, t, rho)?;
    let j1 = thermo::total_current(&gm.transformed, t, rho)?;
    let j0 = thermo::total_current(&gm.base, t, rho)?;
    let terms = thermo::gauge_terms(&gm.base, &gm.gauge, t, rho)?;
    let direct = ds - beta * j1;
    let via_rule = (ds - beta * j0) - beta * (terms.j_delta_h + terms.c_delta_h);
    let discrepancy = (direct - via_rule).abs();
    if discrepancy > 1e-9 * direct.abs().max(1.0) {
        return Err(Error::CrossCheck {
            what: "thermal entropy production gauge rule".into(),
            discrepancy,
        });
    }
    Ok(direct)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpSample {
    pub t: f64,
    pub entropy: f64,
    pub entropy_rate: f64,
    pub sigma: Option<f64>,
    pub ep_rate: Option<f64>,
    pub thermal_ep_rate: Option<f64>,
}

/// Optional ingredients of an [`EpSample`].
#[derive(Clone, Copy, Debug, Default)]
pub struct EpInputs<'a> {
    pub rho0: Option<&'a CMatrix>,
    pub rho_star: Option<&'a CMatrix>,
    pub beta: Option<f64>,
}

pub fn ep_sample(gm: &GaugedModel, t: f64, rho: &CMatrix, inputs: EpInputs<'_>) -> Result<EpSample> {
    let entropy = von_neumann_entropy(rho)?;
    let entropy_rate = entropy_rate(&gm.base, t, rho)?;
    let (sigma, ep_rate) = match (inputs.rho0, inputs.rho_star) {
        (Some(r0), Some(rs)) => (
            Some(ep_sigma(r0, rho, rs)?),
            Some(ep_rate(&gm.base, t, rho, rs)?),
        ),
        (None, Some(rs)) => (None, Some(ep_rate(&gm.base, t, rho, rs)?)),
        _ => (None, None),
    };
    let thermal_ep_rate = match inputs.beta {
        Some(b) => Some(thermal_ep_rate(gm, t, rho, b)?),
        None => None,
    };
    Ok(EpSample {
        t,
        entropy,
        entropy_rate,
        sigma,
        ep_rate,
        thermal_ep_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ops::*;

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&diag(&[1.0, 0.0])).unwrap().abs() <= 1e-12);
        let s = von_neumann_entropy(&diag(&[0.5, 0.5])).unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-15);
        let r: f64 = 0.3;
        let h = -(0.5 + r) * (0.5 + r).ln() - (0.5 - r) * (0.5 - r).ln();
        assert!((von_neumann_entropy(&diag(&[0.5 + r, 0.5 - r])).unwrap() - h).abs() < 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let (p, q) = (0.7, 0.4);
        let rho = diag(&[p, 1.0 - p]);
        let kl = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        let s = relative_entropy(&rho, &diag(&[q, 1.0 - q])).unwrap();
        assert!((s - kl).abs() < 1e-14);
        assert!(relative_entropy(&rho, &rho).unwrap().abs() < 1e-14);
        assert!(matches!(
            relative_entropy(&rho, &diag(&[1.0, 0.0])),
            Err(Error::SupportViolation)
        ));
    }

    #[test]
    fn sigma_vanishes_at_the_start() {
        let rho = diag(&[0.3, 0.7]);
        let star = diag(&[0.5, 0.5]);
        assert_eq!(ep_sigma(&rho, &rho, &star).unwrap(), 0.0);
    }
}
