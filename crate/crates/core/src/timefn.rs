//! Time-dependent values with an optional analytic derivative.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::linalg::CMatrix;

pub type Shared<T> = Arc<dyn Fn(f64) -> T + Send + Sync>;

/// Step of the central difference used whenever an analytic derivative is
/// absent: `h = 1e-6 · max(1, |t|)`.
pub fn fd_step(t: f64) -> f64 {
    1e-6 * t.abs().max(1.0)
}

pub trait Differentiable: Clone + Send + Sync + 'static {
    fn central_difference(plus: &Self, minus: &Self, h: f64) -> Self;
    fn zero_like(&self) -> Self;
}

impl Differentiable for f64 {
    fn central_difference(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus) / (2.0 * h)
    }
    fn zero_like(&self) -> Self {
        0.0
    }
}

impl Differentiable for Complex64 {
    fn central_difference(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus) / (2.0 * h)
    }
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
}

impl Differentiable for CMatrix {
    fn central_difference(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus).unscale(2.0 * h)
    }
    fn zero_like(&self) -> Self {
        CMatrix::zeros(self.nrows(), self.ncols())
    }
}

#[derive(Clone)]
pub struct TimeFn<T> {
    value: Shared<T>,
    derivative: Option<Shared<T>>,
}

impl<T: Differentiable> TimeFn<T> {
    pub fn new(value: impl Fn(f64) -> T + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative(
        value: impl Fn(f64) -> T + Send + Sync + 'static,
        derivative: impl Fn(f64) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn from_shared(value: Shared<T>, derivative: Option<Shared<T>>) -> Self {
        Self { value, derivative }
    }

    pub fn constant(v: T) -> Self {
        let zero = v.zero_like();
        Self::with_derivative(move |_| v.clone(), move |_| zero.clone())
    }

    pub fn at(&self, t: f64) -> T {
        (self.value)(t)
    }

    pub fn derivative_at(&self, t: f64) -> T {
        match &self.derivative {
            Some(d) => d(t),
            None => self.numeric_derivative_at(t),
        }
    }

    pub fn numeric_derivative_at(&self, t: f64) -> T {
        let h = fd_step(t);
        T::central_difference(&(self.value)(t + h), &(self.value)(t - h), h)
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// Drops the analytic derivative so the numeric fallback is used.
    pub fn without_derivative(&self) -> Self {
        Self {
            value: self.value.clone(),
            derivative: None,
        }
    }

    pub fn shared_value(&self) -> Shared<T> {
        self.value.clone()
    }

    /// The derivative as a closure, numeric if no analytic form exists.
    pub fn shared_derivative(&self) -> Shared<T> {
        match &self.derivative {
            Some(d) => d.clone(),
            None => {
                let f = self.value.clone();
                Arc::new(move |t| {
                    let h = fd_step(t);
                    T::central_difference(&f(t + h), &f(t - h), h)
                })
            }
        }
    }
}

impl<T> fmt::Debug for TimeFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeFn")
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_fallback_matches_analytic() {
        let f = TimeFn::with_derivative(|t: f64| t.sin() * t, |t: f64| t.cos() * t + t.sin());
        for &t in &[0.0, 0.7, 3.1, -12.5, 140.0] {
            let a = f.derivative_at(t);
            let n = f.numeric_derivative_at(t);
            assert!((a - n).abs() <= 1e-6 * a.abs().max(1.0), "t={t}: {a} vs {n}");
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let f = TimeFn::constant(Complex64::new(2.0, -1.0));
        assert_eq!(f.derivative_at(4.0), Complex64::new(0.0, 0.0));
        assert!(f.has_analytic_derivative());
    }
}
