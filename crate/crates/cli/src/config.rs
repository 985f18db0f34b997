use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use covshift_core::{FilterFamily, FilterSpec, KernelSpec, ScenarioKind, ScenarioSpec};
use serde::{Deserialize, Serialize};

/// Bad flags or an unusable config. Maps to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Dre,
    True,
    Unit,
}

impl WeightSource {
    pub fn name(self) -> &'static str {
        match self {
            WeightSource::Dre => "dre",
            WeightSource::True => "true",
            WeightSource::Unit => "unit",
        }
    }
}

impl fmt::Display for WeightSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dre" => Ok(WeightSource::Dre),
            "true" => Ok(WeightSource::True),
            "unit" => Ok(WeightSource::Unit),
            other => Err(format!("unknown weight source `{other}` (expected dre, true or unit)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub family: FilterFamily,
    pub tau: Option<f64>,
    pub e: Option<f64>,
    pub f: Option<f64>,
    /// Fixed regression `lambda` instead of the `n_f^(-s)` schedule.
    pub lam_override: Option<f64>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            family: FilterFamily::Krr,
            tau: None,
            e: None,
            f: None,
            lam_override: None,
        }
    }
}

impl FilterConfig {
    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or_else(|| self.family.default_tau())
    }

    /// The configured declaration at parameter `lam`.
    pub fn spec(&self, lam: f64) -> covshift_core::Result<FilterSpec> {
        let tau = self.tau();
        let (e, f) = self.family.default_constants(tau);
        FilterSpec::declared(self.family, lam, tau, self.e.unwrap_or(e), self.f.unwrap_or(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    /// Defaults to a Gaussian kernel with the scenario's bandwidth.
    pub kernel: Option<KernelSpec>,
    pub filter: FilterConfig,
    pub alpha: f64,
    pub iota: f64,
    pub m: f64,
    pub r: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub noise_sigma: f64,
    pub n_theta_grid: Vec<usize>,
    pub n_f_grid: Vec<usize>,
    pub replications: usize,
    pub n_mc: usize,
    pub seed_base: u64,
    /// Defaults to the number of logical CPUs.
    pub workers: Option<usize>,
    pub delta: f64,
    pub delta_phi: f64,
    pub dense_limit: usize,
    pub weight_sources: Vec<WeightSource>,
    pub figure1_points: usize,
    /// Sample size used to approximate operator norms in `diagnose`.
    pub reference_size: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Log,
            kernel: None,
            filter: FilterConfig::default(),
            alpha: 0.5,
            iota: 0.5,
            m: 10.0,
            r: 0.5,
            epsilon: 0.01,
            beta: 1.5,
            noise_sigma: covshift_core::scenarios::DEFAULT_NOISE_SIGMA,
            n_theta_grid: vec![125, 250, 500, 1000, 2000],
            n_f_grid: vec![100, 200, 400, 800],
            replications: 20,
            n_mc: 100_000,
            seed_base: 20240601,
            workers: None,
            delta: 0.1,
            delta_phi: 1.0,
            dense_limit: covshift_core::Factorization::DEFAULT_DENSE_LIMIT,
            weight_sources: vec![WeightSource::Dre, WeightSource::True, WeightSource::Unit],
            figure1_points: 400,
            reference_size: 1000,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| usage(format!("malformed config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(usage(msg)) };
        check(self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)")?;
        check(self.iota >= 0.5, "iota must be at least 1/2")?;
        check(self.m > 2.0, "m must exceed 2")?;
        check(self.r >= 0.5 && self.r.is_finite(), "r must be at least 1/2")?;
        check(self.epsilon > 0.0, "epsilon must be positive")?;
        check(self.beta >= 1.0 && self.beta.is_finite(), "beta must be at least 1")?;
        check(
            self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(),
            "noise_sigma must be non-negative",
        )?;
        check(self.delta > 0.0 && self.delta < 1.0, "delta must lie in (0, 1)")?;
        check(self.delta_phi >= 0.0, "delta_phi must be non-negative")?;
        check(self.replications >= 1, "replications must be at least 1")?;
        check(self.n_mc >= 1, "n_mc must be at least 1")?;
        check(self.figure1_points >= 2, "figure1_points must be at least 2")?;
        check(self.reference_size >= 1, "reference_size must be at least 1")?;
        check(self.dense_limit >= 1, "dense_limit must be at least 1")?;
        check(self.workers != Some(0), "workers must be at least 1")?;
        check(!self.weight_sources.is_empty(), "weight_sources must not be empty")?;
        for (name, grid) in [("n_theta_grid", &self.n_theta_grid), ("n_f_grid", &self.n_f_grid)] {
            check(!grid.is_empty(), &format!("{name} must not be empty"))?;
            check(grid[0] >= 1, &format!("{name} entries must be positive"))?;
            check(
                grid.windows(2).all(|w| w[0] < w[1]),
                &format!("{name} must be strictly increasing"),
            )?;
        }
        if let Some(k) = self.kernel {
            k.validated().map_err(|e| usage(e.to_string()))?;
        }
        if let Some(lam) = self.filter.lam_override {
            check(lam > 0.0 && lam.is_finite(), "filter.lam_override must be positive")?;
        }
        self.filter.spec(1.0).map_err(|e| usage(e.to_string()))?;
        Ok(())
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            kind: self.scenario,
            noise_sigma: self.noise_sigma,
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel.unwrap_or(KernelSpec::Gaussian {
            bandwidth: self.scenario_spec().default_bandwidth(),
        })
    }

    pub fn factorization(&self) -> covshift_core::Factorization {
        covshift_core::Factorization::Auto {
            dense_limit: self.dense_limit,
        }
    }

    /// `n_theta = ceil(n_f^beta)`.
    pub fn coupled_n_theta(&self, n_f: usize) -> usize {
        ((n_f as f64).powf(self.beta) - 1e-9).ceil() as usize
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}
