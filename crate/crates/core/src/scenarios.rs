//! Synthetic covariate-shift scenarios with exact samplers and closed-form
//! density ratios.
//!
//! | name          | source      | target                     | theta(x)           |
//! |---------------|-------------|----------------------------|--------------------|
//! | `log`         | U(0, 1)     | density `-ln x`            | `-ln x`            |
//! | `logsq`       | U(0, 1)     | density `(ln x)^2 / 2`     | `(ln x)^2 / 2`     |
//! | `gauss_shift` | N(0, 1)     | N(1, 1)                    | `exp(x - 1/2)`     |
//! | `identity`    | U(0, 1)     | U(0, 1)                    | `1`                |
//!
//! If `X = U_1 ... U_k` for independent uniforms then `-ln X ~ Gamma(k, 1)`,
//! so `X` has density `(-ln x)^(k-1) / (k-1)!` on `(0, 1)`; the `log` and
//! `logsq` targets are the `k = 2` and `k = 3` products.
//!
//! `gauss_shift` lives on the whole real line and so is not compact; it is
//! kept because it is the textbook Gaussian shift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dre::relative_of_standard;
use crate::error::{Error, Result};
use crate::points::Points;
use crate::regression::LabeledSample;

const STREAM_SOURCE: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_LABELED: u64 = 3;
const STREAM_MIXTURE: u64 = 4;

pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Log,
    Logsq,
    GaussShift,
    Identity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Log,
        ScenarioKind::Logsq,
        ScenarioKind::GaussShift,
        ScenarioKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Log => "log",
            ScenarioKind::Logsq => "logsq",
            ScenarioKind::GaussShift => "gauss_shift",
            ScenarioKind::Identity => "identity",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitInterval,
    RealLine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub noise_sigma: f64,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    }

    pub fn with_noise(kind: ScenarioKind, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", noise_sigma, "must be non-negative"));
        }
        Ok(Self { kind, noise_sigma })
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            ScenarioKind::GaussShift => Domain::RealLine,
            _ => Domain::UnitInterval,
        }
    }

    /// Kernel bandwidth used when none is configured.
    pub fn default_bandwidth(&self) -> f64 {
        match self.domain() {
            Domain::UnitInterval => 0.15,
            Domain::RealLine => 0.3,
        }
    }

    fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    fn draw_source(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.kind {
            ScenarioKind::GaussShift => rng.sample(StandardNormal),
            ScenarioKind::Log | ScenarioKind::Logsq => open_unit(rng),
            ScenarioKind::Identity => rng.random::<f64>(),
        }
    }

    fn draw_target(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.kind {
            ScenarioKind::GaussShift => 1.0 + Distribution::<f64>::sample(&StandardNormal, rng),
            ScenarioKind::Log => open_unit(rng) * open_unit(rng),
            ScenarioKind::Logsq => open_unit(rng) * open_unit(rng) * open_unit(rng),
            ScenarioKind::Identity => rng.random::<f64>(),
        }
    }

    /// `n` i.i.d. draws from the source input law.
    pub fn sample_source(&self, n: usize, seed: u64) -> Points {
        let mut rng = Self::rng(seed, STREAM_SOURCE);
        Points::from_scalars((0..n).map(|_| self.draw_source(&mut rng)).collect())
    }

    /// `n` i.i.d. draws from the target input law.
    pub fn sample_target(&self, n: usize, seed: u64) -> Points {
        let mut rng = Self::rng(seed, STREAM_TARGET);
        Points::from_scalars((0..n).map(|_| self.draw_target(&mut rng)).collect())
    }

    /// `n` i.i.d. draws from `(1 - alpha) rho_S + alpha rho_T`.
    pub fn sample_mixture(&self, alpha: f64, n: usize, seed: u64) -> Points {
        let mut rng = Self::rng(seed, STREAM_MIXTURE);
        Points::from_scalars(
            (0..n)
                .map(|_| {
                    if rng.random::<f64>() < alpha {
                        self.draw_target(&mut rng)
                    } else {
                        self.draw_source(&mut rng)
                    }
                })
                .collect(),
        )
    }

    /// Labeled source data `y = f_rho(x) + N(0, sigma^2)`.
    pub fn sample_labeled(&self, n_f: usize, seed: u64) -> LabeledSample {
        let mut rng = Self::rng(seed, STREAM_LABELED);
        let mut xs = Vec::with_capacity(n_f);
        let mut ys = Vec::with_capacity(n_f);
        for _ in 0..n_f {
            let x = self.draw_source(&mut rng);
            let eps: f64 = rng.sample(StandardNormal);
            xs.push(x);
            ys.push(self.f_rho(x) + self.noise_sigma * eps);
        }
        LabeledSample::new(Points::from_scalars(xs), ys).expect("sampled data is finite")
    }

    fn check_support(&self, x: f64) -> Result<()> {
        let inside = match self.kind {
            ScenarioKind::GaussShift => x.is_finite(),
            ScenarioKind::Log | ScenarioKind::Logsq => x > 0.0 && x <= 1.0,
            ScenarioKind::Identity => (0.0..=1.0).contains(&x),
        };
        if inside {
            Ok(())
        } else {
            Err(Error::OutsideSupport {
                x,
                scenario: self.name(),
            })
        }
    }

    /// `theta(x) = d rho_T / d rho_S (x)`.
    pub fn theta(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match self.kind {
            ScenarioKind::Log => -x.ln(),
            ScenarioKind::Logsq => {
                let l = x.ln();
                l * l / 2.0
            }
            ScenarioKind::GaussShift => (x - 0.5).exp(),
            ScenarioKind::Identity => 1.0,
        })
    }

    /// `phi(x) = theta / (alpha theta + 1 - alpha)`.
    pub fn phi(&self, alpha: f64, x: f64) -> Result<f64> {
        Ok(relative_of_standard(self.theta(x)?, alpha))
    }

    pub fn theta_at(&self, points: &Points) -> Result<Vec<f64>> {
        points.iter().map(|p| self.theta(p[0])).collect()
    }

    pub fn phi_at(&self, alpha: f64, points: &Points) -> Result<Vec<f64>> {
        points.iter().map(|p| self.phi(alpha, p[0])).collect()
    }

    /// Regression function: `sin(2 pi x)` on the unit interval,
    /// `x exp(-x^2 / 2)` on the real line.
    pub fn f_rho(&self, x: f64) -> f64 {
        match self.domain() {
            Domain::UnitInterval => (2.0 * std::f64::consts::PI * x).sin(),
            Domain::RealLine => x * (-x * x / 2.0).exp(),
        }
    }

    pub fn f_rho_at(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|p| self.f_rho(p[0])).collect()
    }

    /// `E_S[theta^m]`, finite for every `m` in all shipped scenarios.
    pub fn theta_moment(&self, m: f64) -> f64 {
        use statrs::function::gamma::gamma;
        match self.kind {
            // -ln U ~ Exp(1)
            ScenarioKind::Log => gamma(m + 1.0),
            ScenarioKind::Logsq => gamma(2.0 * m + 1.0) / 2f64.powf(m),
            // theta = exp(Z - 1/2) is log-normal
            ScenarioKind::GaussShift => (m * m / 2.0 - m / 2.0).exp(),
            ScenarioKind::Identity => 1.0,
        }
    }
}

/// Uniform on `(0, 1]`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}
