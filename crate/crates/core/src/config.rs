//! Experiment configuration (TOML) and its fingerprint.
//!
//! Every section and key has a default, so an empty file describes the
//! model problem `μ = c = h = 1` on `(0, 1)`. The fingerprint is the SHA-256
//! of the canonical re-serialization with the output section removed.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::continuation::{ContinuationOptions, DiagnosticsRequest};
use crate::fields::{make_field, AssumptionOptions, FieldSpec};
use crate::geometry::{Domain, Grid};
use crate::solver::{GradientScheme, Init, Problem, SolveOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scheme: GradientScheme,
    pub domain: Domain,
    pub grid: GridConfig,
    pub fields: FieldsConfig,
    pub lambda: LambdaConfig,
    pub solver: SolverConfig,
    pub continuation: ContinuationOptions,
    pub diagnostics: DiagnosticsConfig,
    pub assumptions: AssumptionsConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scheme: GradientScheme::default(),
            domain: Domain::Interval { a: 0.0, b: 1.0 },
            grid: GridConfig::default(),
            fields: FieldsConfig::default(),
            lambda: LambdaConfig::default(),
            solver: SolverConfig::default(),
            continuation: ContinuationOptions::default(),
            diagnostics: DiagnosticsConfig::default(),
            assumptions: AssumptionsConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per axis.
    pub resolution: usize,
    /// Number of grids in refinement studies (each halves the spacing).
    pub levels: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 101,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldsConfig {
    pub mu: FieldSpec,
    pub c: FieldSpec,
    pub h: FieldSpec,
}

impl Default for FieldsConfig {
    fn default() -> Self {
        Self {
            mu: FieldSpec::constant(1.0),
            c: FieldSpec::constant(1.0),
            h: FieldSpec::constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaConfig {
    /// Parameter for single solves and the start of continuation.
    pub value: f64,
    /// Lower end `Λ₁` of the range used for uniform-bound probes.
    pub lambda1: f64,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self {
            value: 0.0,
            lambda1: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Zero,
    ScaledEigenfunction { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_residual: f64,
    pub max_newton_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
    pub init: InitConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            tol_residual: d.tol_residual,
            max_newton_iters: d.max_newton_iters,
            backtrack: d.backtrack,
            min_step: d.min_step,
            init: InitConfig::Zero,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tol_residual: self.tol_residual,
            max_newton_iters: self.max_newton_iters,
            backtrack: self.backtrack,
            min_step: self.min_step,
            init: match self.init {
                InitConfig::Zero => Init::Zero,
                InitConfig::ScaledEigenfunction { t } => Init::ScaledEigenfunction(t),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub eta: f64,
    /// Ball radius; defaults to the distance from `x0` to the boundary.
    pub rho: Option<f64>,
    /// Ball centre; defaults to the centre of the domain.
    pub x0: Option<Vec<f64>>,
    pub p_list: Vec<f64>,
    pub gamma_list: Vec<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            rho: None,
            x0: None,
            p_list: vec![1.0, 2.0],
            gamma_list: vec![0.5],
        }
    }
}

impl DiagnosticsConfig {
    pub fn request(&self, domain: &Domain) -> DiagnosticsRequest {
        let (lo, hi) = (domain.lower(), domain.upper());
        let x0 = self.x0.clone().unwrap_or_else(|| {
            (0..domain.dimension()).map(|k| 0.5 * (lo[k] + hi[k])).collect()
        });
        let rho = self.rho.unwrap_or_else(|| domain.distance_to_boundary(&x0));
        DiagnosticsRequest {
            eta: self.eta,
            rho,
            x0,
            p_list: self.p_list.clone(),
            gamma_list: self.gamma_list.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionsConfig {
    pub sigma_c: Option<f64>,
    pub sigma_mu: Option<f64>,
    pub sub_box: Option<Domain>,
    pub mu0: Option<f64>,
    pub collar_fraction: f64,
}

impl Default for AssumptionsConfig {
    fn default() -> Self {
        Self {
            sigma_c: None,
            sigma_mu: None,
            sub_box: None,
            mu0: None,
            collar_fraction: 0.1,
        }
    }
}

impl AssumptionsConfig {
    pub fn options(&self) -> AssumptionOptions {
        AssumptionOptions {
            sigma_c: self.sigma_c,
            sigma_mu: self.sigma_mu,
            sub_box: self.sub_box,
            mu0: self.mu0,
            collar_fraction: self.collar_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardyConfig {
    pub p: f64,
    pub a: f64,
    pub k: f64,
    /// Nodes per axis on the coarsest grid over `ω`.
    pub resolution: usize,
    pub trials: usize,
    /// `ω`; defaults to the experiment domain.
    pub omega: Option<Domain>,
}

impl Default for HardyConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            a: 1.5,
            k: 0.0,
            resolution: 17,
            trials: 50,
            omega: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Randomized interpolation trials (random exponents and functions).
    pub trials: usize,
    pub hardy: HardyConfig,
    /// Exponent `k` of the exponential identity.
    pub exp_k: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            hardy: HardyConfig::default(),
            exp_k: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Write a creation time into report headers (off for byte-identical runs).
    pub timestamp: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            timestamp: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.grid.resolution < 3 {
            return Err(Error::ResolutionTooSmall {
                got: self.grid.resolution,
                min: 3,
            });
        }
        if self.grid.levels == 0 {
            return Err(Error::Config("grid.levels must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical serialization: the fully defaulted config, re-emitted.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn fingerprint(&self) -> String {
        let mut stripped = self.clone();
        stripped.output = OutputConfig::default();
        let digest = Sha256::digest(stripped.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid_at(&self, resolution: usize) -> Result<Grid> {
        Grid::new(self.domain, resolution)
    }

    pub fn problem_on(&self, grid: &Grid) -> Result<Problem> {
        let mu = make_field(&self.fields.mu, grid)?;
        let c = make_field(&self.fields.c, grid)?;
        let h = make_field(&self.fields.h, grid)?;
        Ok(Problem::new(grid.clone(), mu, c, h)?.with_scheme(self.scheme))
    }

    pub fn problem(&self) -> Result<Problem> {
        self.problem_on(&self.grid_at(self.grid.resolution)?)
    }
}
