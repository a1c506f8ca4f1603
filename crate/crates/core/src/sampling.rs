//! Seeded generators of random states, models and pseudo-unitary gauges.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::gauge::GaugeSpec;
use crate::linalg::{self, c, CMatrix};
use crate::master_equation::{Channel, DensityMatrix, MasterEquationModel, Operator, Signature};
use crate::timefn::TimeFn;

fn cnormal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // Box–Muller
    let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
    let r = (-2.0 * u1.ln()).sqrt() / std::f64::consts::SQRT_2;
    Complex64::from_polar(r, 2.0 * PI * u2)
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| cnormal(rng) * scale)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMatrix {
    linalg::hermitize(&random_matrix(rng, dim, scale))
}

/// Full-rank state: a Ginibre draw mixed with `I/dim` at weight `mixing`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize, mixing: f64) -> DensityMatrix {
    let a = random_matrix(rng, dim, 1.0);
    let w = &a * a.adjoint();
    let tr = linalg::trace(&w).re;
    let mixed = w.scale((1.0 - mixing) / tr) + linalg::identity(dim).scale(mixing / dim as f64);
    DensityMatrix::new_unchecked(linalg::hermitize(&mixed))
}

pub fn random_signature<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ModelOptions {
    pub dim: usize,
    pub channels: usize,
    pub mixed_signature: bool,
    pub time_dependent: bool,
    /// Scale of channels with `g = −1` relative to those with `g = +1`.
    pub negative_scale: f64,
}

impl ModelOptions {
    pub fn new(dim: usize, channels: usize) -> Self {
        Self {
            dim,
            channels,
            mixed_signature: true,
            time_dependent: true,
            negative_scale: 1.0,
        }
    }
}

fn oscillating(amplitude: Complex64, rate: f64, phase: f64) -> TimeFn<Complex64> {
    TimeFn::with_derivative(
        move |t| amplitude * c(0.0, rate * t + phase).exp(),
        move |t| amplitude * c(0.0, rate) * c(0.0, rate * t + phase).exp(),
    )
}

/// `H = H₀ + sin(νt + ϑ)H₁`, `L_μ = A_μ + e^{iν_μt}B_μ`, channels alternating between
/// reservoirs `r0` and `r1`.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, opts: &ModelOptions) -> MasterEquationModel {
    let d = opts.dim;
    let signs = if opts.mixed_signature {
        random_signature(rng, opts.channels)
    } else {
        vec![1.0; opts.channels]
    };
    let h0 = random_hermitian(rng, d, 1.0);
    let h = if opts.time_dependent {
        let h1 = random_hermitian(rng, d, 0.5);
        let (nu, th) = (rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI));
        let (h1a, h0a) = (h1.clone(), h0.clone());
        Operator::with_derivative(
            d,
            "H",
            move |t| &h0a + h1a.scale((nu * t + th).sin()),
            move |t| h1.scale(nu * (nu * t + th).cos()),
        )
    } else {
        Operator::constant("H", h0)
    };
    let channels = signs
        .iter()
        .enumerate()
        .map(|(mu, &g)| {
            let scale = if g < 0.0 { opts.negative_scale } else { 1.0 } * 0.5;
            let a = random_matrix(rng, d, scale);
            let label = format!("L{mu}");
            let op = if opts.time_dependent {
                let b = random_matrix(rng, d, 0.3 * scale);
                let f = oscillating(c(1.0, 0.0), rng.random_range(0.5..2.0), 0.0);
                Operator::sum(
                    label.clone(),
                    vec![
                        Operator::constant("A", a),
                        Operator::scaled("B", b, f),
                    ],
                )
                .expect("equal dimensions")
            } else {
                Operator::constant(label, a)
            };
            Channel::new(op, format!("r{}", mu % 2))
        })
        .collect();
    let mut reservoirs = BTreeMap::new();
    for k in 0..opts.channels.min(2) {
        reservoirs.insert(format!("r{k}"), Some(0.5 + k as f64));
    }
    MasterEquationModel::new(
        h,
        channels,
        Signature::constant(signs).expect("unit signs"),
        reservoirs,
    )
    .expect("random models are well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiMode {
    Zero,
    Constant,
    TimeDependent,
}

#[derive(Clone, Debug)]
pub struct GaugeOptions {
    pub time_dependent: bool,
    pub with_umatrix: bool,
    pub phi: PhiMode,
    pub gamma_scale: f64,
    pub boost_scale: f64,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self {
            time_dependent: true,
            with_umatrix: true,
            phi: PhiMode::TimeDependent,
            gamma_scale: 0.5,
            boost_scale: 0.6,
        }
    }
}

/// Two-level block on `(a, b)`: a rotation when the signs agree, a boost otherwise.
#[derive(Clone, Copy)]
struct PairFactor {
    a: usize,
    b: usize,
    boost: bool,
    r0: f64,
    r1: f64,
    kappa: f64,
    chi: f64,
}

impl PairFactor {
    fn angle(&self, t: f64) -> (f64, f64) {
        (
            self.r0 + self.r1 * (self.kappa * t).sin(),
            self.r1 * self.kappa * (self.kappa * t).cos(),
        )
    }

    fn embed(&self, m: usize, block: [[Complex64; 2]; 2], base: CMatrix) -> CMatrix {
        let mut u = base;
        u[(self.a, self.a)] = block[0][0];
        u[(self.a, self.b)] = block[0][1];
        u[(self.b, self.a)] = block[1][0];
        u[(self.b, self.b)] = block[1][1];
        debug_assert_eq!(u.nrows(), m);
        u
    }

    fn value(&self, m: usize, t: f64) -> CMatrix {
        let (r, _) = self.angle(t);
        let e = c(0.0, self.chi).exp();
        let block = if self.boost {
            let (ch, sh) = (r.cosh(), r.sinh());
            [[c(ch, 0.0), e.conj() * sh], [e * sh, c(ch, 0.0)]]
        } else {
            let (co, si) = (r.cos(), r.sin());
            [[c(co, 0.0), -e.conj() * si], [e * si, c(co, 0.0)]]
        };
        self.embed(m, block, linalg::identity(m))
    }

    fn derivative(&self, m: usize, t: f64) -> CMatrix {
        let (r, dr) = self.angle(t);
        let e = c(0.0, self.chi).exp();
        let block = if self.boost {
            let (ch, sh) = (r.cosh() * dr, r.sinh() * dr);
            [[c(sh, 0.0), e.conj() * ch], [e * ch, c(sh, 0.0)]]
        } else {
            let (co, si) = (r.cos() * dr, r.sin() * dr);
            [[c(-si, 0.0), -e.conj() * co], [e * co, c(-si, 0.0)]]
        };
        self.embed(m, block, linalg::zeros(m))
    }
}

/// Pseudo-unitary `U(t)` for signature `signs`: a product of phases and
/// rotations or boosts on random pairs, with its analytic derivative.
pub fn random_umatrix<R: Rng + ?Sized>(
    rng: &mut R,
    signs: &[f64],
    time_dependent: bool,
    boost_scale: f64,
) -> TimeFn<CMatrix> {
    let m = signs.len();
    let rate = |rng: &mut R| if time_dependent { rng.random_range(-1.5..1.5) } else { 0.0 };
    let phases: Vec<(f64, f64)> = (0..m)
        .map(|_| (rng.random_range(0.0..2.0 * PI), rate(rng)))
        .collect();
    let mut factors = Vec::new();
    if m >= 2 {
        for _ in 0..m {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let boost = signs[a] != signs[b];
            let amp = if boost { boost_scale } else { PI };
            factors.push(PairFactor {
                a,
                b,
                boost,
                r0: rng.random_range(-amp..amp),
                r1: if time_dependent { rng.random_range(-0.3..0.3) * amp } else { 0.0 },
                kappa: rng.random_range(0.5..2.0),
                chi: rng.random_range(0.0..2.0 * PI),
            });
        }
    }
    let phase_value = {
        let phases = phases.clone();
        move |t: f64| {
            CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                m,
                phases.iter().map(|&(p, w)| c(0.0, p + w * t).exp()),
            ))
        }
    };
    let phase_derivative = move |t: f64| {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            m,
            phases.iter().map(|&(p, w)| c(0.0, w) * c(0.0, p + w * t).exp()),
        ))
    };
    let (fv, pv) = (factors.clone(), phase_value.clone());
    TimeFn::with_derivative(
        move |t| fv.iter().fold(pv(t), |acc, f| acc * f.value(m, t)),
        move |t| {
            let values: Vec<CMatrix> = std::iter::once(phase_value(t))
                .chain(factors.iter().map(|f| f.value(m, t)))
                .collect();
            let derivs: Vec<CMatrix> = std::iter::once(phase_derivative(t))
                .chain(factors.iter().map(|f| f.derivative(m, t)))
                .collect();
            (0..values.len())
                .map(|k| {
                    values
                        .iter()
                        .enumerate()
                        .fold(linalg::identity(m), |acc, (j, v)| {
                            acc * if j == k { &derivs[j] } else { v }
                        })
                })
                .fold(linalg::zeros(m), |acc, x| acc + x)
        },
    )
}

pub fn random_gauge<R: Rng + ?Sized>(rng: &mut R, signs: &[f64], opts: &GaugeOptions) -> GaugeSpec {
    let gamma = signs
        .iter()
        .map(|_| {
            let a = cnormal(rng) * opts.gamma_scale;
            if opts.time_dependent {
                let b = cnormal(rng) * (0.5 * opts.gamma_scale);
                let (nu, ph) = (rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0 * PI));
                TimeFn::with_derivative(
                    move |t| a + b * c(0.0, nu * t + ph).exp(),
                    move |t| b * c(0.0, nu) * c(0.0, nu * t + ph).exp(),
                )
            } else {
                TimeFn::constant(a)
            }
        })
        .collect();
    let mut spec = GaugeSpec::from_gamma(gamma);
    if opts.with_umatrix {
        let u = random_umatrix(rng, signs, opts.time_dependent, opts.boost_scale);
        spec = spec.with_umatrix(u).expect("matching size");
    }
    let phi0 = rng.random_range(-1.0..1.0);
    let phi = match opts.phi {
        PhiMode::Zero => TimeFn::constant(0.0),
        PhiMode::TimeDependent if opts.time_dependent => {
            let (a, w) = (rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0));
            TimeFn::with_derivative(
                move |t| phi0 + a * (w * t).sin(),
                move |t| a * w * (w * t).cos(),
            )
        }
        _ => TimeFn::constant(phi0),
    };
    spec.with_phi(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn umatrix_is_pseudo_unitary_with_matching_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let signs = [1.0, -1.0, 1.0, -1.0];
        let u = random_umatrix(&mut rng, &signs, true, 0.6);
        let g = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            4,
            signs.iter().map(|&s| c(s, 0.0)),
        ));
        for t in [0.0, 0.8, 2.1] {
            let ut = u.at(t);
            assert!(linalg::frobenius(&(ut.adjoint() * &g * &ut - &g)) < 1e-12);
            let diff = u.derivative_at(t) - u.numeric_derivative_at(t);
            assert!(linalg::frobenius(&diff) < 1e-6);
        }
    }

    #[test]
    fn states_are_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(&mut rng, 5, 0.2);
        assert!(rho.min_eigenvalue().unwrap() >= 0.2 / 5.0 - 1e-12);
        assert!(rho.trace_error() < 1e-14);
    }
}
