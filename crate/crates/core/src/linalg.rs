//! Dense complex operator algebra for small Hilbert spaces.
//!
//! Everything here works on [`CMatrix`], a dynamically sized complex matrix.
//! Units follow ħ = 1 throughout the crate, so Hamiltonians are frequencies.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative Hermiticity tolerance used for validating inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalue floor applied before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-14;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> CMatrix {
    CMatrix::zeros(dim, dim)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// ‖A − A†‖_F
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn check_square_pair(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// `AB − BA`
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square_pair(a, b)?;
    Ok(a * b - b * a)
}

/// `AB + BA`
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_square_pair(a, b)?;
    Ok(a * b + b * a)
}

/// `Tr(A ρ)` without forming the product.
pub fn expectation(a: &CMatrix, rho: &CMatrix) -> Result<Complex64> {
    check_square_pair(a, rho)?;
    Ok(trace_product(a, rho))
}

/// `Tr(AB)` for conforming square matrices; callers guarantee the shapes.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    /// `V diag(f(λ)) V†`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fl = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        scaled * v.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEig> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let residual = hermiticity_residual(a);
    if residual > HERMITIAN_TOL * frobenius(a).max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(a.nrows(), a.ncols(), |r, col| {
        eig.eigenvectors[(r, order[col])]
    });
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// `V diag(f(max(λ, clamp))) V†` for Hermitian `A`.
pub fn matrix_function(a: &CMatrix, f: impl Fn(f64) -> f64, clamp: f64) -> Result<CMatrix> {
    let eig = eig_hermitian(a)?;
    Ok(eig.map(|lam| f(lam.max(clamp))))
}

pub fn log_hermitian(a: &CMatrix) -> Result<CMatrix> {
    matrix_function(a, f64::ln, LOG_CLAMP)
}

pub fn exp_hermitian(a: &CMatrix) -> Result<CMatrix> {
    matrix_function(a, f64::exp, f64::NEG_INFINITY)
}

/// Column-stacking vectorization: `vec(A)[i + n j] = A[i, j]`.
pub fn stack(a: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(a.as_slice())
}

pub fn unstack(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Standard named operators.
pub mod ops {
    use super::*;

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    /// `diag(1, −1)`: `|0⟩` is the `+1` eigenvector.
    pub fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    /// `σ₊ = |0⟩⟨1|`, raising towards the `σ_z = +1` level.
    pub fn sigma_plus() -> CMatrix {
        projector(2, 0, 1)
    }

    /// `σ₋ = |1⟩⟨0|`
    pub fn sigma_minus() -> CMatrix {
        projector(2, 1, 0)
    }

    /// `|m⟩⟨n|`
    pub fn projector(dim: usize, m: usize, n: usize) -> CMatrix {
        let mut p = zeros(dim);
        p[(m, n)] = ONE;
        p
    }

    /// Truncated bosonic annihilation operator, `a|n⟩ = √n |n−1⟩`.
    pub fn ladder_lower(dim: usize) -> CMatrix {
        let mut a = zeros(dim);
        for n in 1..dim {
            a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
        }
        a
    }

    pub fn ladder_raise(dim: usize) -> CMatrix {
        ladder_lower(dim).adjoint()
    }

    pub fn diag(values: &[f64]) -> CMatrix {
        let mut d = zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            d[(i, i)] = c(v, 0.0);
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::ops::*;
    use super::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        frobenius(&(a - b)) <= tol
    }

    #[test]
    fn self_commutator_vanishes() {
        let z = pauli_z();
        assert!(close(&commutator(&z, &z).unwrap(), &zeros(2), 0.0));
    }

    #[test]
    fn pauli_algebra() {
        let xy = commutator(&pauli_x(), &pauli_y()).unwrap();
        assert!(close(&xy, &pauli_z().scale(2.0).map(|z| z * I), 1e-15));
        let xx = anticommutator(&pauli_x(), &pauli_x()).unwrap();
        assert!(close(&xx, &identity(2).scale(2.0), 1e-15));
        let anti = anticommutator(&pauli_x(), &pauli_y()).unwrap();
        assert!(close(&anti, &zeros(2), 1e-15));
    }

    #[test]
    fn identity_commutes_and_zero_absorbs() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64 - 0.3 * j as f64, (i * j) as f64));
        assert!(close(&commutator(&identity(3), &a).unwrap(), &zeros(3), 0.0));
        assert!(close(&anticommutator(&a, &zeros(3)).unwrap(), &zeros(3), 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = commutator(&identity(2), &identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(expectation(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn expectation_examples() {
        let p = 0.8;
        let rho = diag(&[p, 1.0 - p]);
        let ez = expectation(&pauli_z(), &rho).unwrap();
        assert!((ez.re - (2.0 * p - 1.0)).abs() < 1e-15);
        assert!(ez.im.abs() < 1e-15);
        let mixed = identity(2).scale(0.5);
        assert!(expectation(&pauli_z(), &mixed).unwrap().norm() < 1e-15);
        assert!((expectation(&identity(2), &rho).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eig_examples() {
        let e = eig_hermitian(&diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0]);
        let e = eig_hermitian(&pauli_x()).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(close(&e.reconstruct(), &pauli_x(), 1e-13));
        let shifted = eig_hermitian(&(pauli_x() + identity(2).scale(3.0))).unwrap();
        assert!((shifted.eigenvalues[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = sigma_plus();
        assert!(matches!(eig_hermitian(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn matrix_function_examples() {
        assert!(close(&exp_hermitian(&zeros(3)).unwrap(), &identity(3), 1e-14));
        let e = std::f64::consts::E;
        let l = log_hermitian(&diag(&[e, e * e])).unwrap();
        assert!(close(&l, &diag(&[1.0, 2.0]), 1e-14));
        // pure state: finite logarithm, zero entropy
        let pure = diag(&[1.0, 0.0]);
        let l = log_hermitian(&pure).unwrap();
        assert!(is_finite(&l));
        let s = -trace(&(&pure * l)).re;
        assert!(s.abs() <= 1e-12);
    }

    #[test]
    fn ladder_commutator_is_identity_below_cutoff() {
        let a = ladder_lower(5);
        let comm = commutator(&a, &ladder_raise(5)).unwrap();
        for n in 0..4 {
            assert!((comm[(n, n)].re - 1.0).abs() < 1e-14);
        }
    }
}
