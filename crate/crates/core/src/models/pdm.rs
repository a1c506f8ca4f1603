//! Pure decoherence of a qubit: `H = ωσ_z/2`, `L = √|Γ(t)| σ_z`, `g = sign Γ(t)`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, ops, CMatrix};
use crate::master_equation::{
    Channel, DensityMatrix, MasterEquationModel, Operator, Signature, VALIDATION_TIMES,
};
use crate::timefn::TimeFn;

#[derive(Clone, Debug)]
pub struct PdmParams {
    pub omega: f64,
    /// `Γ(t)`, may change sign.
    pub gamma: TimeFn<f64>,
    /// Initial population of `|0⟩`.
    pub p: f64,
    pub rho01: Complex64,
}

impl PdmParams {
    pub fn new(omega: f64, gamma: TimeFn<f64>, p: f64, rho01: Complex64) -> Result<Self> {
        let params = Self {
            omega,
            gamma,
            p,
            rho01,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn constant_rate(omega: f64, rate: f64, p: f64, rho01: Complex64) -> Result<Self> {
        Self::new(omega, TimeFn::constant(rate), p, rho01)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParams(format!("population p = {}", self.p)));
        }
        if self.rho01.norm_sqr() > self.p * (1.0 - self.p) + 1e-12 {
            return Err(Error::InvalidParams(format!(
                "|rho01|^2 = {} exceeds p(1-p)",
                self.rho01.norm_sqr()
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::InvalidParams("omega must be finite".into()));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c(self.p, 0.0), self.rho01, self.rho01.conj(), c(1.0 - self.p, 0.0)],
        ))
    }

    fn has_constant_rate(&self) -> bool {
        self.gamma.has_analytic_derivative()
            && VALIDATION_TIMES
                .iter()
                .all(|&t| self.gamma.derivative_at(t) == 0.0)
    }
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn build_pdm(params: &PdmParams) -> Result<MasterEquationModel> {
    params.validate()?;
    let h = Operator::constant("H", ops::pauli_z().scale(params.omega / 2.0));
    let (g1, g2) = (params.gamma.clone(), params.gamma.clone());
    let l = Operator::with_derivative(
        2,
        "L",
        move |t| ops::pauli_z().scale(g1.at(t).abs().sqrt()),
        move |t| {
            let rate = g2.at(t);
            let root = rate.abs().sqrt();
            if root == 0.0 {
                return linalg::zeros(2);
            }
            ops::pauli_z().scale(sign(rate) * g2.derivative_at(t) / (2.0 * root))
        },
    );
    let signature = if params.has_constant_rate() {
        Signature::constant(vec![sign(params.gamma.at(0.0))])?
    } else {
        let g = params.gamma.clone();
        Signature::time_dependent(1, move |t| vec![sign(g.at(t))])
    };
    let mut reservoirs = BTreeMap::new();
    reservoirs.insert("env".to_string(), None);
    let model = MasterEquationModel::new(h, vec![Channel::new(l, "env")], signature, reservoirs)?;
    for &t in &VALIDATION_TIMES {
        let s = model.snapshot(t)?;
        let comm = linalg::commutator(&s.lindblads[0], &s.hamiltonian)?;
        if linalg::frobenius(&comm) > 1e-12 {
            return Err(Error::InvalidParams("[L, H] must vanish".into()));
        }
    }
    Ok(model)
}

/// `D(t) = exp(−2∫₀ᵗ Γ)`, the coherence factor generated by
/// `L = √|Γ| σ_z` with signature `sign Γ`.
pub fn pdm_decoherence(params: &PdmParams, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let n = 2 * ((t.abs() * 200.0).ceil() as usize).max(32);
    let h = t / n as f64;
    let f = |k: usize| params.gamma.at(h * k as f64);
    let inner: f64 = (1..n)
        .map(|k| if k % 2 == 1 { 4.0 * f(k) } else { 2.0 * f(k) })
        .sum();
    let integral = h / 3.0 * (f(0) + inner + f(n));
    (-2.0 * integral).exp()
}

pub fn pdm_analytic_state(params: &PdmParams, t: f64) -> Result<DensityMatrix> {
    let d = pdm_decoherence(params, t);
    let r01 = params.rho01 * c(0.0, -params.omega * t).exp() * d;
    Ok(DensityMatrix::new_unchecked(CMatrix::from_row_slice(
        2,
        2,
        &[c(params.p, 0.0), r01, r01.conj(), c(1.0 - params.p, 0.0)],
    )))
}

/// `p|0⟩⟨0| + (1 − p)|1⟩⟨1|`
pub fn pdm_fixed_point(params: &PdmParams) -> DensityMatrix {
    DensityMatrix::new_unchecked(ops::diag(&[params.p, 1.0 - params.p]))
}

/// `H(x) = −(½+x) ln(½+x) − (½−x) ln(½−x)`
pub fn binary_entropy(x: f64) -> f64 {
    let term = |y: f64| if y <= 0.0 { 0.0 } else { -y * y.ln() };
    term(0.5 + x) + term(0.5 - x)
}

/// Closed-form `(Σ, ℰ)` at `t`.
pub fn pdm_ep_closed_form(params: &PdmParams, t: f64) -> (f64, f64) {
    let d = pdm_decoherence(params, t);
    let r = |d: f64| ((params.p - 0.5).powi(2) + (params.rho01 * d).norm_sqr()).sqrt();
    let (r0, rt) = (r(1.0), r(d));
    let sigma = binary_entropy(rt) - binary_entropy(r0);
    // ∂t D² = 2D·∂tD = −4Γ D²
    let d2_dot = -4.0 * params.gamma.at(t) * d * d;
    let c2 = params.rho01.norm_sqr();
    let weight = if rt < 1e-150 {
        2.0
    } else {
        (2.0 * rt).min(1.0 - 1e-12).atanh() / rt
    };
    (sigma, -c2 * weight * d2_dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rate: f64) -> PdmParams {
        PdmParams::constant_rate(1.0, rate, 0.7, c(0.3, 0.1)).unwrap()
    }

    #[test]
    fn constant_rate_gives_constant_signature() {
        let m = build_pdm(&params(1.0)).unwrap();
        assert!(m.signature().is_constant());
        assert_eq!(m.signature().at(3.0), vec![1.0]);
    }

    #[test]
    fn oscillating_rate_switches_signature() {
        let p = PdmParams::new(
            1.0,
            TimeFn::with_derivative(f64::cos, |t: f64| -t.sin()),
            0.6,
            c(0.2, 0.0),
        )
        .unwrap();
        let m = build_pdm(&p).unwrap();
        assert_eq!(m.signature().at(1.5), vec![1.0]);
        assert_eq!(m.signature().at(1.6), vec![-1.0]);
    }

    #[test]
    fn analytic_state_examples() {
        let p = params(1.0);
        let s0 = pdm_analytic_state(&p, 0.0).unwrap();
        assert_eq!(s0.matrix(), p.initial_state().unwrap().matrix());
        let s1 = pdm_analytic_state(&p, 1.0).unwrap();
        let expected = p.rho01.norm() * (-2.0f64).exp();
        assert!((s1.matrix()[(0, 1)].norm() - expected).abs() < 1e-14);
    }

    #[test]
    fn positivity_of_initial_data_is_enforced() {
        assert!(PdmParams::constant_rate(1.0, 1.0, 0.5, c(0.6, 0.0)).is_err());
        assert!(PdmParams::constant_rate(1.0, 1.0, 1.2, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let p = params(0.5);
        assert_eq!(pdm_ep_closed_form(&p, 0.0).0, 0.0);
        // p = 1/2, |ρ01| = 0.4, D = e^{−t}
        let half = PdmParams::constant_rate(1.0, 0.5, 0.5, c(0.4, 0.0)).unwrap();
        let mut last = 0.0;
        for k in 1..20 {
            let t = 0.25 * k as f64;
            let (sigma, rate) = pdm_ep_closed_form(&half, t);
            let expected = binary_entropy(0.4 * (-t).exp()) - binary_entropy(0.4);
            assert!((sigma - expected).abs() < 1e-12);
            assert!(sigma > last && rate > 0.0);
            last = sigma;
        }
    }
}
