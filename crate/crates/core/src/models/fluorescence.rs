//! A driven two-level atom in a thermal field, written two ways: with an
//! explicit drive in the Hamiltonian, or with the drive absorbed into
//! displaced jump operators.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::GaugeSpec;
use crate::linalg::{c, ops, CMatrix};
use crate::master_equation::{Channel, MasterEquationModel, Operator, Signature};
use crate::timefn::TimeFn;

use super::beta_from_occupation;

#[derive(Clone, Debug)]
pub struct FluorescencePair {
    /// `H = ω₀σ_z/2 + V̂(t)`, `L_± = λ_±σ_±`.
    pub driven: MasterEquationModel,
    /// `H = ω₀σ_z/2`, `L_± = λ_±σ_± − γ_±`.
    pub displaced: MasterEquationModel,
    /// `γ_±`, mapping `displaced` onto `driven`.
    pub witness: GaugeSpec,
}

pub const BATH: &str = "bath";

/// `γ_± = −iΩ λ_±⁻¹ e^{±iωt}`
fn displacement(omega: f64, drive: f64, lambda: f64, sign: f64) -> TimeFn<Complex64> {
    let amp = c(0.0, -drive / lambda);
    let rate = sign * omega;
    TimeFn::with_derivative(
        move |t| amp * c(0.0, rate * t).exp(),
        move |t| amp * c(0.0, rate) * c(0.0, rate * t).exp(),
    )
}

pub fn resonance_fluorescence_pair(
    omega0: f64,
    omega: f64,
    drive: f64,
    gamma: f64,
    nbar: f64,
) -> Result<FluorescencePair> {
    if !(gamma > 0.0 && nbar > 0.0) {
        return Err(Error::InvalidParams(format!(
            "degenerate rates: Gamma = {gamma}, nbar = {nbar}"
        )));
    }
    if ![omega0, omega, drive].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParams("frequencies must be finite".into()));
    }
    let lp = (gamma * nbar).sqrt();
    let lm = (gamma * (nbar + 1.0)).sqrt();
    let beta = (omega0 > 0.0).then(|| beta_from_occupation(nbar, omega0));
    let reservoirs = BTreeMap::from([(BATH.to_string(), beta)]);
    let h0 = ops::pauli_z().scale(omega0 / 2.0);
    let (sp, sm) = (ops::sigma_plus(), ops::sigma_minus());

    let gp = displacement(omega, drive, lp, 1.0);
    let gm = displacement(omega, drive, lm, -1.0);

    let v = {
        let (sp, sm) = (sp.clone(), sm.clone());
        move |t: f64| -> CMatrix {
            let e = c(0.0, -omega * t).exp();
            (sp.map(|z| z * e) + sm.map(|z| z * e.conj())).scale(drive)
        }
    };
    let v_dot = {
        let (sp, sm) = (sp.clone(), sm.clone());
        move |t: f64| -> CMatrix {
            let e = c(0.0, -omega * t).exp();
            (sm.map(|z| z * e.conj()) - sp.map(|z| z * e)).map(|z| z * c(0.0, omega * drive))
        }
    };
    let h_driven = {
        let h0 = h0.clone();
        Operator::with_derivative(2, "H", move |t| &h0 + v(t), v_dot)
    };
    let driven = MasterEquationModel::new(
        h_driven,
        vec![
            Channel::new(Operator::constant("L+", sp.scale(lp)), BATH),
            Channel::new(Operator::constant("L-", sm.scale(lm)), BATH),
        ],
        Signature::positive(2),
        reservoirs.clone(),
    )?;

    let shifted = |label: &str, m: CMatrix, g: &TimeFn<Complex64>| {
        let eye = crate::linalg::identity(2);
        let (gv, gd) = (g.clone(), g.clone());
        let eye2 = eye.clone();
        Operator::with_derivative(
            2,
            label,
            move |t| &m - eye.map(|z| z * gv.at(t)),
            move |t| -eye2.map(|z| z * gd.derivative_at(t)),
        )
    };
    let displaced = MasterEquationModel::new(
        Operator::constant("H", h0),
        vec![
            Channel::new(shifted("L+", sp.scale(lp), &gp), BATH),
            Channel::new(shifted("L-", sm.scale(lm), &gm), BATH),
        ],
        Signature::positive(2),
        reservoirs,
    )?;

    Ok(FluorescencePair {
        driven,
        displaced,
        witness: GaugeSpec::from_gamma(vec![gp, gm]),
    })
}
