//! Thermal decay of a two-level atom, built to satisfy detailed balance.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::ops;
use crate::master_equation::{Channel, MasterEquationModel, Operator, Signature};

pub const BATH: &str = "bath";

/// `H = H_S = ω₀σ_z/2`, `A₁ = √Γ σ₋` at Bohr frequency `ω₀`, `A₂ = e^{−βω₀/2} A₁†`.
pub fn build_qdbc_decay(omega0: f64, beta: f64, gamma: f64) -> Result<(MasterEquationModel, Operator)> {
    if !(omega0 > 0.0 && beta > 0.0 && gamma > 0.0) || !(omega0 * beta * gamma).is_finite() {
        return Err(Error::InvalidParams(format!(
            "need positive finite arguments, got omega0 = {omega0}, beta = {beta}, Gamma = {gamma}"
        )));
    }
    let h_s = Operator::constant("H_S", ops::pauli_z().scale(omega0 / 2.0));
    let a1 = ops::sigma_minus().scale(gamma.sqrt());
    let a2 = a1.adjoint().scale((-beta * omega0 / 2.0).exp());
    let model = MasterEquationModel::new(
        h_s.clone(),
        vec![
            Channel::new(Operator::constant("A1", a1), BATH),
            Channel::new(Operator::constant("A2", a2), BATH),
        ],
        Signature::positive(2),
        BTreeMap::from([(BATH.to_string(), Some(beta))]),
    )?;
    Ok((model, h_s))
}
