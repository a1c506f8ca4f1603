//! Three-level maser driven on the 1–2 transition and coupled to a hot bath
//! on 1–3 and a cold bath on 2–3.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::GaugeSpec;
use crate::linalg::{c, ops, CMatrix, ZERO};
use crate::master_equation::{Channel, DensityMatrix, MasterEquationModel, Operator, Signature};
use crate::timefn::TimeFn;

use super::{beta_from_occupation, occupation};

pub const HOT: &str = "hot";
pub const COLD: &str = "cold";

#[derive(Clone, Debug, PartialEq)]
pub struct MaserParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub beta_h: f64,
    pub beta_c: f64,
}

impl MaserParams {
    pub fn new(
        levels: [f64; 3],
        epsilon: f64,
        gamma: f64,
        beta_h: f64,
        beta_c: f64,
    ) -> Result<Self> {
        let p = Self {
            omega1: levels[0],
            omega2: levels[1],
            omega3: levels[2],
            epsilon,
            gamma,
            beta_h,
            beta_c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Inverse temperatures recovered from the bath occupations.
    pub fn from_occupations(
        levels: [f64; 3],
        epsilon: f64,
        gamma: f64,
        nbar_h: f64,
        nbar_c: f64,
    ) -> Result<Self> {
        if nbar_h <= 0.0 || nbar_c <= 0.0 {
            return Err(Error::InvalidParams("occupations must be positive".into()));
        }
        let beta_h = beta_from_occupation(nbar_h, levels[2] - levels[0]);
        let beta_c = beta_from_occupation(nbar_c, levels[2] - levels[1]);
        Self::new(levels, epsilon, gamma, beta_h, beta_c)
    }

    /// Γ = 1, ε = 0.5, n̄_h = 2, n̄_c = 0.5, levels (0, 1, 3).
    pub fn reference() -> Self {
        Self::from_occupations([0.0, 1.0, 3.0], 0.5, 1.0, 2.0, 0.5).expect("valid reference")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.omega1,
            self.omega2,
            self.omega3,
            self.epsilon,
            self.gamma,
            self.beta_h,
            self.beta_c,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("maser parameters must be finite".into()));
        }
        if !(self.omega1 < self.omega2 && self.omega2 < self.omega3) {
            return Err(Error::InvalidParams(
                "levels must satisfy omega1 < omega2 < omega3".into(),
            ));
        }
        if self.gamma <= 0.0 || self.epsilon < 0.0 {
            return Err(Error::InvalidParams("need Gamma > 0 and epsilon >= 0".into()));
        }
        if self.beta_h <= 0.0 || self.beta_c <= 0.0 {
            return Err(Error::InvalidParams("inverse temperatures must be positive".into()));
        }
        if self.nbar_h() < self.nbar_c() - 1e-12 {
            return Err(Error::InvalidParams(format!(
                "hot occupation {} below cold occupation {}",
                self.nbar_h(),
                self.nbar_c()
            )));
        }
        Ok(())
    }

    /// Drive frequency `ω₂ − ω₁`.
    pub fn omega(&self) -> f64 {
        self.omega2 - self.omega1
    }

    pub fn omega_h(&self) -> f64 {
        self.omega3 - self.omega1
    }

    pub fn omega_c(&self) -> f64 {
        self.omega3 - self.omega2
    }

    pub fn nbar_h(&self) -> f64 {
        occupation(self.beta_h, self.omega_h())
    }

    pub fn nbar_c(&self) -> f64 {
        occupation(self.beta_c, self.omega_c())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    pub fn carnot_bound(&self) -> f64 {
        1.0 - self.beta_h / self.beta_c
    }

    fn channel_matrices(&self) -> [CMatrix; 4] {
        let (g, nh, nc) = (self.gamma, self.nbar_h(), self.nbar_c());
        [
            ops::projector(3, 2, 0).scale((g * nh).sqrt()),
            ops::projector(3, 0, 2).scale((g * (nh + 1.0)).sqrt()),
            ops::projector(3, 2, 1).scale((g * nc).sqrt()),
            ops::projector(3, 1, 2).scale((g * (nc + 1.0)).sqrt()),
        ]
    }

    fn channels(&self) -> Vec<Channel> {
        let labels = ["A_h1", "A_h2", "A_c1", "A_c2"];
        let tags = [HOT, HOT, COLD, COLD];
        self.channel_matrices()
            .into_iter()
            .zip(labels.iter().zip(tags))
            .map(|(m, (label, tag))| Channel::new(Operator::constant(*label, m), tag))
            .collect()
    }

    fn reservoirs(&self) -> BTreeMap<String, Option<f64>> {
        BTreeMap::from([
            (HOT.to_string(), Some(self.beta_h)),
            (COLD.to_string(), Some(self.beta_c)),
        ])
    }
}

/// Lab-frame model with `V̂(t) = ε(e^{iωt}|1⟩⟨2| + e^{−iωt}|2⟩⟨1|)`.
pub fn build_maser(params: &MaserParams) -> Result<MasterEquationModel> {
    params.validate()?;
    let (w, eps) = (params.omega(), params.epsilon);
    let h0 = ops::diag(&[params.omega1, params.omega2, params.omega3]);
    let up = ops::projector(3, 0, 1);
    let down = ops::projector(3, 1, 0);
    let drive = {
        let (up, down) = (up.clone(), down.clone());
        move |t: f64| {
            let e = c(0.0, w * t).exp();
            (up.map(|z| z * e) + down.map(|z| z * e.conj())).scale(eps)
        }
    };
    let drive_dot = move |t: f64| {
        let e = c(0.0, w * t).exp();
        (up.map(|z| z * e) - down.map(|z| z * e.conj())).map(|z| z * c(0.0, w * eps))
    };
    let h = Operator::with_derivative(3, "H", move |t| &h0 + drive(t), drive_dot);
    MasterEquationModel::new(h, params.channels(), Signature::positive(4), params.reservoirs())
}

/// The same machine in the frame co-rotating with `Ĥ₀`, where the drive is static.
pub fn build_maser_rotating(params: &MaserParams) -> Result<MasterEquationModel> {
    params.validate()?;
    let v = (ops::projector(3, 0, 1) + ops::projector(3, 1, 0)).scale(params.epsilon);
    MasterEquationModel::new(
        Operator::constant("V", v),
        params.channels(),
        Signature::positive(4),
        params.reservoirs(),
    )
}

/// Limit-cycle populations and the co-rotating coherence `ρ₁₂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaserSteadyState {
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub rho12: Complex64,
    pub omega: f64,
}

impl MaserSteadyState {
    fn with_coherence(&self, r12: Complex64) -> DensityMatrix {
        let mut m = ops::diag(&[self.rho11, self.rho22, self.rho33]);
        m[(0, 1)] = r12;
        m[(1, 0)] = r12.conj();
        DensityMatrix::new_unchecked(m)
    }

    pub fn rotating(&self) -> DensityMatrix {
        self.with_coherence(self.rho12)
    }

    /// Lab-frame state on the limit cycle, `ρ₁₂(t) = ρ₁₂ e^{iωt}`.
    pub fn at(&self, t: f64) -> DensityMatrix {
        self.with_coherence(self.rho12 * c(0.0, self.omega * t).exp())
    }
}

fn kappa_and_k(params: &MaserParams) -> (f64, f64) {
    let (g, eps, nh, nc) = (params.gamma, params.epsilon, params.nbar_h(), params.nbar_c());
    let kappa = 4.0 * eps * eps / (g * (nc + nh));
    let k = kappa * (4.0 + 3.0 * nc + 3.0 * nh) + g * (nc + nh + 3.0 * nc * nh);
    (kappa, k)
}

pub fn maser_steady_state(params: &MaserParams) -> MaserSteadyState {
    let (g, eps, nh, nc) = (params.gamma, params.epsilon, params.nbar_h(), params.nbar_c());
    let (kappa, k) = kappa_and_k(params);
    let rho11 = (g * nc * (nh + 1.0) + kappa * (nc + nh + 2.0)) / k;
    let rho22 = (g * (nc + 1.0) * nh + kappa * (nc + nh + 2.0)) / k;
    let rho12 = c(0.0, -2.0 * eps / (g * (nc + nh)) * (rho22 - rho11));
    MaserSteadyState {
        rho11,
        rho22,
        rho33: 1.0 - rho11 - rho22,
        rho12,
        omega: params.omega(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaserThermo {
    pub j_h: f64,
    pub j_c: f64,
    /// Work over one period `2π/ω`.
    pub w_cycle: f64,
    pub eta: f64,
    pub carnot_bound: f64,
}

pub fn maser_thermo(params: &MaserParams) -> MaserThermo {
    let (kappa, k) = kappa_and_k(params);
    let flux = params.gamma * (params.nbar_h() - params.nbar_c()) * kappa / k;
    let ss = maser_steady_state(params);
    MaserThermo {
        j_h: flux * params.omega_h(),
        j_c: -flux * params.omega_c(),
        w_cycle: 4.0 * PI * params.epsilon * ss.rho12.im,
        eta: 1.0 - params.omega_c() / params.omega_h(),
        carnot_bound: params.carnot_bound(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaserGauge {
    /// `γ_{h,1} = γ*_{c,1} = C e^{iωt/2}`
    Shifting,
    /// `γ_{h,1} = −γ*_{c,1} = C e^{iωt/2}`
    ShiftingFlipped,
    /// `γ_{h,1} = γ*_{c,1} = C e^{−iωt}`
    Neutral,
}

impl FromStr for MaserGauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shifting" => Ok(MaserGauge::Shifting),
            "shifting_flipped" => Ok(MaserGauge::ShiftingFlipped),
            "neutral" => Ok(MaserGauge::Neutral),
            other => Err(Error::InvalidParams(format!("unknown maser gauge '{other}'"))),
        }
    }
}

impl MaserGauge {
    /// Predicted pointwise change of the hot current on the limit cycle.
    pub fn predicted_hot_shift(self, coefficient: Complex64, params: &MaserParams) -> Option<f64> {
        let base = -0.5
            * params.gamma
            * (params.nbar_c() * params.nbar_h()).sqrt()
            * coefficient.norm_sqr()
            * maser_steady_state(params).rho12.im;
        match self {
            MaserGauge::Shifting => Some(base),
            MaserGauge::ShiftingFlipped => Some(-base),
            MaserGauge::Neutral => None,
        }
    }
}

pub fn maser_gauge_family(kind: MaserGauge, coefficient: Complex64, params: &MaserParams) -> GaugeSpec {
    let w = params.omega();
    let (rate, cold_sign) = match kind {
        MaserGauge::Shifting => (0.5 * w, 1.0),
        MaserGauge::ShiftingFlipped => (0.5 * w, -1.0),
        MaserGauge::Neutral => (-w, 1.0),
    };
    let hot = TimeFn::with_derivative(
        move |t| coefficient * c(0.0, rate * t).exp(),
        move |t| coefficient * c(0.0, rate) * c(0.0, rate * t).exp(),
    );
    let cc = coefficient.conj() * cold_sign;
    let cold = TimeFn::with_derivative(
        move |t| cc * c(0.0, -rate * t).exp(),
        move |t| cc * c(0.0, -rate) * c(0.0, -rate * t).exp(),
    );
    GaugeSpec::from_gamma(vec![
        hot,
        TimeFn::constant(ZERO),
        cold,
        TimeFn::constant(ZERO),
    ])
}
