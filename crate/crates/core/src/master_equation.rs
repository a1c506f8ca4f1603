//! Time-local master equations in Lindblad form with a diagonal ±1 signature.
//!
//! ```text
//! ∂t ρ = i[ρ, H] − Σ_μ (g_μ/2) ({L_μ† L_μ, ρ} − 2 L_μ ρ L_μ†)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::SVD;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HERMITIAN_TOL, I, ONE};
use crate::timefn::{Shared, TimeFn};

/// Times at which models and gauges are spot-checked on construction.
pub const VALIDATION_TIMES: [f64; 4] = [0.0, 0.37, 1.3, 2.9];

/// Reservoir tag for channels that belong to no thermodynamic bath.
pub const UNTAGGED: &str = "none";

#[derive(Clone)]
pub struct Operator {
    dim: usize,
    label: String,
    f: TimeFn<CMatrix>,
}

impl Operator {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        value: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            label: label.into(),
            f: TimeFn::new(value),
        }
    }

    pub fn with_derivative(
        dim: usize,
        label: impl Into<String>,
        value: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
        derivative: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            label: label.into(),
            f: TimeFn::with_derivative(value, derivative),
        }
    }

    pub fn from_timefn(dim: usize, label: impl Into<String>, f: TimeFn<CMatrix>) -> Self {
        Self {
            dim,
            label: label.into(),
            f,
        }
    }

    pub fn constant(label: impl Into<String>, m: CMatrix) -> Self {
        Self {
            dim: m.nrows(),
            label: label.into(),
            f: TimeFn::constant(m),
        }
    }

    /// `scale(t) · m` with the product rule for the derivative.
    pub fn scaled(label: impl Into<String>, m: CMatrix, scale: TimeFn<Complex64>) -> Self {
        let dim = m.nrows();
        let mv = m.clone();
        let sv = scale.clone();
        Self::with_derivative(
            dim,
            label,
            move |t| mv.map(|z| z * sv.at(t)),
            move |t| m.map(|z| z * scale.derivative_at(t)),
        )
    }

    pub fn zero(dim: usize, label: impl Into<String>) -> Self {
        Self::constant(label, linalg::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn at(&self, t: f64) -> CMatrix {
        self.f.at(t)
    }

    pub fn derivative_at(&self, t: f64) -> CMatrix {
        self.f.derivative_at(t)
    }

    pub fn numeric_derivative_at(&self, t: f64) -> CMatrix {
        self.f.numeric_derivative_at(t)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.f.has_analytic_derivative()
    }

    pub fn timefn(&self) -> &TimeFn<CMatrix> {
        &self.f
    }

    pub fn sum(label: impl Into<String>, terms: Vec<Operator>) -> Result<Self> {
        let dim = terms.first().map(|o| o.dim).ok_or_else(|| {
            Error::InvalidParams("operator sum needs at least one term".into())
        })?;
        if let Some(bad) = terms.iter().find(|o| o.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim,
            });
        }
        let vt = terms.clone();
        Ok(Self::with_derivative(
            dim,
            label,
            move |t| vt.iter().fold(linalg::zeros(dim), |acc, o| acc + o.at(t)),
            move |t| {
                terms
                    .iter()
                    .fold(linalg::zeros(dim), |acc, o| acc + o.derivative_at(t))
            },
        ))
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct Channel {
    pub lindblad: Operator,
    pub reservoir: String,
}

impl Channel {
    pub fn new(lindblad: Operator, reservoir: impl Into<String>) -> Self {
        Self {
            lindblad,
            reservoir: reservoir.into(),
        }
    }
}

/// Diagonal of `g`, each entry `+1` or `−1`.
#[derive(Clone)]
pub enum Signature {
    Constant(Vec<f64>),
    TimeDependent { len: usize, f: Shared<Vec<f64>> },
}

impl Signature {
    pub fn positive(m: usize) -> Self {
        Signature::Constant(vec![1.0; m])
    }

    pub fn constant(diag: Vec<f64>) -> Result<Self> {
        validate_signs(&diag)?;
        Ok(Signature::Constant(diag))
    }

    pub fn time_dependent(
        len: usize,
        f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Signature::TimeDependent {
            len,
            f: Arc::new(f),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Signature::Constant(d) => d.len(),
            Signature::TimeDependent { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Signature::Constant(_))
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        match self {
            Signature::Constant(d) => d.clone(),
            Signature::TimeDependent { f, .. } => f(t),
        }
    }

    pub fn checked_at(&self, t: f64) -> Result<Vec<f64>> {
        let g = self.at(t);
        if g.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "signature",
                expected: self.len(),
                found: g.len(),
            });
        }
        validate_signs(&g)?;
        Ok(g)
    }
}

fn validate_signs(diag: &[f64]) -> Result<()> {
    match diag.iter().find(|&&s| s != 1.0 && s != -1.0) {
        Some(s) => Err(Error::InvalidSignature(format!("entry {s} is not ±1"))),
        None => Ok(()),
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::Constant(d) => f.debug_tuple("Constant").field(d).finish(),
            Signature::TimeDependent { len, .. } => {
                f.debug_struct("TimeDependent").field("len", len).finish()
            }
        }
    }
}

/// All operators of a model evaluated at one instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub hamiltonian: CMatrix,
    pub lindblads: Vec<CMatrix>,
    pub signature: Vec<f64>,
}

impl Snapshot {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn unitary(&self, rho: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        (rho * h - h * rho).map(|z| z * I)
    }

    pub fn dissipator(&self, rho: &CMatrix) -> CMatrix {
        let mut out = linalg::zeros(self.dim());
        for (l, &g) in self.lindblads.iter().zip(&self.signature) {
            let ld = l.adjoint();
            let ldl = &ld * l;
            let term = &ldl * rho + rho * &ldl - (l * rho * &ld).scale(2.0);
            out -= term.scale(0.5 * g);
        }
        out
    }

    pub fn adjoint_dissipator(&self, x: &CMatrix) -> CMatrix {
        let mut out = linalg::zeros(self.dim());
        for (l, &g) in self.lindblads.iter().zip(&self.signature) {
            let ld = l.adjoint();
            let ldl = &ld * l;
            let term = &ldl * x + x * &ldl - (&ld * x * l).scale(2.0);
            out -= term.scale(0.5 * g);
        }
        out
    }

    pub fn liouvillian(&self, rho: &CMatrix) -> CMatrix {
        self.unitary(rho) + self.dissipator(rho)
    }

    /// Column-stacked superoperator, `vec(𝔏(ρ)) = Lvec · vec(ρ)`.
    pub fn vectorized(&self) -> CMatrix {
        let n = self.dim();
        let id = linalg::identity(n);
        let h = &self.hamiltonian;
        let mut lv = (h.transpose().kronecker(&id) - id.kronecker(h)).map(|z| z * I);
        for (l, &g) in self.lindblads.iter().zip(&self.signature) {
            let ldl = l.adjoint() * l;
            let term = id.kronecker(&ldl) + ldl.transpose().kronecker(&id)
                - l.conjugate().kronecker(l).scale(2.0);
            lv -= term.scale(0.5 * g);
        }
        lv
    }
}

#[derive(Clone, Debug)]
pub struct MasterEquationModel {
    dim: usize,
    hamiltonian: Operator,
    channels: Vec<Channel>,
    signature: Signature,
    reservoirs: BTreeMap<String, Option<f64>>,
}

impl MasterEquationModel {
    pub fn new(
        hamiltonian: Operator,
        channels: Vec<Channel>,
        signature: Signature,
        reservoirs: BTreeMap<String, Option<f64>>,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        if dim == 0 {
            return Err(Error::InvalidParams("dimension must be positive".into()));
        }
        if signature.len() != channels.len() {
            return Err(Error::LengthMismatch {
                what: "signature",
                expected: channels.len(),
                found: signature.len(),
            });
        }
        for ch in &channels {
            if ch.lindblad.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: ch.lindblad.dim(),
                });
            }
            if ch.reservoir != UNTAGGED && !reservoirs.contains_key(&ch.reservoir) {
                return Err(Error::InvalidParams(format!(
                    "channel {} references undeclared reservoir {:?}",
                    ch.lindblad.label(),
                    ch.reservoir
                )));
            }
        }
        let model = Self {
            dim,
            hamiltonian,
            channels,
            signature,
            reservoirs,
        };
        for &t in &VALIDATION_TIMES {
            let snap = model.snapshot(t)?;
            let h = &snap.hamiltonian;
            let residual = linalg::hermiticity_residual(h);
            if residual > HERMITIAN_TOL * linalg::frobenius(h).max(1.0) {
                return Err(Error::NotHermitian { residual });
            }
        }
        Ok(model)
    }

    /// Closed system: no channels.
    pub fn closed(hamiltonian: Operator) -> Result<Self> {
        Self::new(
            hamiltonian,
            Vec::new(),
            Signature::Constant(Vec::new()),
            BTreeMap::new(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn reservoirs(&self) -> &BTreeMap<String, Option<f64>> {
        &self.reservoirs
    }

    pub fn snapshot(&self, t: f64) -> Result<Snapshot> {
        let hamiltonian = self.hamiltonian.at(t);
        let lindblads: Vec<CMatrix> = self.channels.iter().map(|c| c.lindblad.at(t)).collect();
        if !linalg::is_finite(&hamiltonian) || !lindblads.iter().all(linalg::is_finite) {
            return Err(Error::NonFinite(format!("model operators at t = {t}")));
        }
        Ok(Snapshot {
            t,
            hamiltonian,
            lindblads,
            signature: self.signature.checked_at(t)?,
        })
    }

    /// Rebuild with different operators but the same tags and reservoirs.
    pub fn with_operators(
        &self,
        hamiltonian: Operator,
        lindblads: Vec<Operator>,
    ) -> Result<Self> {
        if lindblads.len() != self.channels.len() {
            return Err(Error::LengthMismatch {
                what: "channels",
                expected: self.channels.len(),
                found: lindblads.len(),
            });
        }
        let channels = lindblads
            .into_iter()
            .zip(&self.channels)
            .map(|(l, c)| Channel::new(l, c.reservoir.clone()))
            .collect();
        Self::new(
            hamiltonian,
            channels,
            self.signature.clone(),
            self.reservoirs.clone(),
        )
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: m.nrows(),
            });
        }
        Ok(())
    }

    /// Whether `H`, every `L_μ` and `g` are time independent (spot-checked).
    pub fn is_autonomous(&self) -> bool {
        if !self.signature.is_constant() {
            return false;
        }
        let tol = 1e-10;
        VALIDATION_TIMES.iter().all(|&t| {
            linalg::frobenius(&self.hamiltonian.derivative_at(t)) <= tol
                && self
                    .channels
                    .iter()
                    .all(|c| linalg::frobenius(&c.lindblad.derivative_at(t)) <= tol)
        })
    }
}

/// `i[ρ, H(t)]`
pub fn unitary_generator(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    model.check_dim(rho)?;
    let h = model.hamiltonian.at(t);
    Ok((rho * &h - &h * rho).map(|z| z * I))
}

pub fn dissipator(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    model.check_dim(rho)?;
    Ok(model.snapshot(t)?.dissipator(rho))
}

pub fn liouvillian(model: &MasterEquationModel, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    model.check_dim(rho)?;
    Ok(model.snapshot(t)?.liouvillian(rho))
}

/// Heisenberg-picture dual of the dissipator: `Tr(𝔇(ρ)X) = Tr(ρ 𝔇⁺(X))`.
pub fn adjoint_dissipator(model: &MasterEquationModel, t: f64, x: &CMatrix) -> Result<CMatrix> {
    model.check_dim(x)?;
    Ok(model.snapshot(t)?.adjoint_dissipator(x))
}

pub fn vectorized_liouvillian(model: &MasterEquationModel, t: f64) -> Result<CMatrix> {
    Ok(model.snapshot(t)?.vectorized())
}

/// Normalized null vectors of the vectorized generator at `t`.
pub fn null_space(model: &MasterEquationModel, t: f64, tol: f64) -> Result<(Vec<CMatrix>, f64)> {
    let lv = vectorized_liouvillian(model, t)?;
    let n = model.dim();
    let svd = SVD::new(lv, false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .expect("right singular vectors were requested");
    let smallest = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let basis = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(k, _)| {
            let row = v_t.row(k).map(|z| z.conj()).transpose();
            linalg::unstack(&row, n)
        })
        .collect();
    Ok((basis, smallest))
}

/// Unique stationary state of the autonomous snapshot at `t`.
pub fn fixed_point(model: &MasterEquationModel, t: f64) -> Result<DensityMatrix> {
    let (basis, smallest) = null_space(model, t, 1e-10)?;
    match basis.len() {
        0 => Err(Error::NoNullVector { smallest }),
        1 => {
            let m = &basis[0];
            let tr = linalg::trace(m);
            if tr.norm() < 1e-12 {
                return Err(Error::NoNullVector { smallest });
            }
            let rho = linalg::hermitize(&m.map(|z| z / tr));
            let residual = linalg::frobenius(&liouvillian(model, t, &rho)?);
            if residual > 1e-9 {
                return Err(Error::NoNullVector { smallest: residual });
            }
            DensityMatrix::new(rho)
        }
        _ => {
            let basis = basis
                .into_iter()
                .map(|m| {
                    let tr = linalg::trace(&m);
                    if tr.norm() > 1e-12 {
                        m.map(|z| z / tr)
                    } else {
                        m
                    }
                })
                .collect();
            Err(Error::DegenerateNullSpace { basis })
        }
    }
}

/// Hermitian, unit-trace, (nearly) positive matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

/// Eigenvalues below this are logged as positivity warnings.
pub const POSITIVITY_WARN: f64 = -1e-8;
/// Eigenvalues below this are rejected.
pub const POSITIVITY_ERROR: f64 = -1e-4;

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if !linalg::is_finite(&m) {
            return Err(Error::NonFinite("density matrix".into()));
        }
        let residual = linalg::hermiticity_residual(&m);
        if residual > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (residual {residual:.3e})"
            )));
        }
        let tr = linalg::trace(&m);
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = linalg::eig_hermitian(&m)?.min();
        if min < POSITIVITY_ERROR {
            return Err(Error::Positivity { min_eigenvalue: min });
        }
        if min < POSITIVITY_WARN {
            log::warn!("density matrix has negative eigenvalue {min:.3e}");
        }
        Ok(Self(m))
    }

    /// Wraps without validation; used for integrator output whose drift is
    /// tracked separately.
    pub fn new_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(linalg::identity(dim).unscale(dim as f64))
    }

    /// `|k⟩⟨k|`
    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self(linalg::ops::projector(dim, k, k))
    }

    /// `e^{−βH}/Tr e^{−βH}`
    pub fn gibbs(h: &CMatrix, beta: f64) -> Result<Self> {
        let eig = linalg::eig_hermitian(h)?;
        let e0 = eig.min();
        let unnorm = eig.map(|e| (-beta * (e - e0)).exp());
        let z = linalg::trace(&unnorm);
        Self::new(unnorm.map(|x| x / z))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::eig_hermitian(&self.0)?.min())
    }

    pub fn trace_error(&self) -> f64 {
        (linalg::trace(&self.0) - ONE).norm()
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}
