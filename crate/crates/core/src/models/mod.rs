//! Worked systems with closed-form oracles.

mod fluorescence;
mod maser;
mod pdm;
mod qdbc;

pub use fluorescence::{resonance_fluorescence_pair, FluorescencePair};
pub use maser::{
    build_maser, build_maser_rotating, maser_gauge_family, maser_steady_state, maser_thermo,
    MaserGauge, MaserParams, MaserSteadyState, MaserThermo,
};
pub use pdm::{
    binary_entropy, build_pdm, pdm_analytic_state, pdm_decoherence, pdm_ep_closed_form,
    pdm_fixed_point, PdmParams,
};
pub use qdbc::build_qdbc_decay;

/// `β = ln(1 + 1/n̄)/ω`, the inverse of the Bose occupation `n̄ = 1/(e^{βω} − 1)`.
pub fn beta_from_occupation(nbar: f64, omega: f64) -> f64 {
    (1.0 + 1.0 / nbar).ln() / omega
}

pub fn occupation(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}
