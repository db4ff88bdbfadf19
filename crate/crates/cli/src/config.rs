//! Run configuration: a JSON document (or preset) plus flag overrides. The
//! effective configuration after defaults is what gets archived and replayed.

use std::path::{Path, PathBuf};

use cfkernel::domain::DomainConfig;
use cfkernel::levi::{calibrate_constants, ContextOptions, KernelContext};
use cfkernel::operators::SchurSlot;
use cfkernel::quadrature::GradedOptions;
use cfkernel::verification::{DefectOptions, DensityFunction, DensityOptions, Thresholds};
use cfkernel::Context;
use serde::{Deserialize, Serialize};

/// A configuration problem, reported with the offending key and exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Domain used by campaigns that do not name their own.
    pub domain: DomainConfig,
    pub context: ContextConfig,
    /// ε values swept by size-estimate, conjugate-symmetry, gamma-uniformity and defect-decay.
    pub eps: Vec<f64>,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Defaults to $CFK_OUTPUT_ROOT/<name>.
    pub output_dir: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub campaigns: Vec<Campaign>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            domain: DomainConfig::ball(1),
            context: ContextConfig::default(),
            eps: vec![0.1, 0.05, 0.025],
            seed: 1,
            threads: None,
            output_dir: None,
            thresholds: Thresholds::default(),
            campaigns: Vec::new(),
        }
    }
}

/// How the kernel context is frozen for a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    /// χ ≡ 1, B² ≡ 0. `None`: on for ball and ellipsoid, off otherwise.
    pub global: Option<bool>,
    /// Cutoff radius; `None` keeps the calibrated value.
    pub mu: Option<f64>,
    pub epsilon: f64,
    pub calibration_samples: usize,
    pub calibration_seed: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self { global: None, mu: None, epsilon: 0.0, calibration_samples: 1000, calibration_seed: 0 }
    }
}

impl ContextConfig {
    pub fn build(&self, domain: &DomainConfig) -> cfkernel::Result<Context> {
        let d = domain.build::<f64>()?;
        let global = self.global.unwrap_or_else(|| d.has_constant_hessian());
        let cal = calibrate_constants(&d, self.calibration_samples, self.calibration_seed)?;
        let opts = ContextOptions {
            epsilon: self.epsilon,
            mu_override: self.mu,
            global_holomorphic_mode: global,
            ..Default::default()
        };
        KernelContext::new(d, &cal, &opts)
    }
}

/// One experiment, optionally on its own domain and context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Campaign {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextConfig>,
    /// Overrides the run-level ε list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
}

impl Campaign {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, domain: None, context: None, eps: None }
    }

    pub fn eps(mut self, eps: &[f64]) -> Self {
        self.eps = Some(eps.to_vec());
        self
    }

    pub fn on(mut self, domain: DomainConfig) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.context = Some(ContextConfig { mu: Some(mu), ..Default::default() });
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReproducingMode {
    Grid,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchurSlotName {
    W,
    Z,
}

impl From<SchurSlotName> for SchurSlot {
    fn from(s: SchurSlotName) -> Self {
        match s {
            SchurSlotName::W => SchurSlot::W,
            SchurSlotName::Z => SchurSlot::Z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    BallExactness {
        #[serde(default = "default_dims3")]
        dims: Vec<usize>,
        #[serde(default = "default_pairs")]
        pairs: usize,
    },
    Reproducing {
        #[serde(default = "default_mode")]
        mode: ReproducingMode,
        /// Grid: angular resolution of the volume rule. Monte Carlo: node count.
        #[serde(default = "default_reproducing_size")]
        size: usize,
        #[serde(default = "default_reproducing_targets")]
        targets: usize,
        /// Exponent vectors; empty means z^0..z^6 (n = 1) or 1, w1, w1 w2^2 (n = 2).
        #[serde(default)]
        monomials: Vec<Vec<u32>>,
    },
    BoundaryFormula {
        #[serde(default = "default_surface_resolution")]
        resolution: usize,
        #[serde(default = "default_boundary_targets")]
        targets: usize,
    },
    K0Law {
        #[serde(default = "default_k0_bases")]
        base_points: usize,
    },
    SizeEstimate {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    ConjugateSymmetry {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Schur {
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "default_depths")]
        depths: Vec<f64>,
        #[serde(default)]
        graded: GradedOptions,
    },
    /// Single Schur integrals at explicit points of the normal ray.
    SchurPoints {
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
        #[serde(default = "default_depths")]
        depths: Vec<f64>,
        #[serde(default = "default_slot")]
        slot: SchurSlotName,
        #[serde(default)]
        graded: GradedOptions,
    },
    ModelIntegral {
        #[serde(default = "default_model_dims")]
        dims: Vec<usize>,
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
    },
    GammaUniformity {
        #[serde(default = "default_gamma_resolution")]
        resolution: usize,
    },
    DefectDecay {
        #[serde(default)]
        options: DefectOptions,
    },
    AbsBergman {
        #[serde(default = "default_abs_resolutions")]
        resolutions: Vec<usize>,
        #[serde(default = "default_abs_shells")]
        shells: usize,
        #[serde(default = "default_p_list")]
        p: Vec<f64>,
    },
    /// Norm estimates of one assembled operator over the ε × p grid.
    Opnorm {
        op: OperatorName,
        #[serde(default = "default_p_list")]
        p: Vec<f64>,
        #[serde(default = "default_gamma_resolution")]
        resolution: usize,
    },
    Density {
        #[serde(default = "default_density_function")]
        function: DensityFunction,
        #[serde(default = "default_density_n")]
        n: Vec<usize>,
        #[serde(default = "default_density_p")]
        p: f64,
        #[serde(default)]
        options: DensityOptions,
    },
    Oracle {
        #[serde(default = "default_oracle_cap")]
        degree_cap: usize,
        /// Degree caps over which the per-degree decay is fitted.
        #[serde(default)]
        slope_caps: Option<(usize, usize)>,
        #[serde(default = "default_point_modulus")]
        point_modulus: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorName {
    Gamma,
    B1,
    Defect,
    AbsBergman,
}

fn default_dims3() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_pairs() -> usize {
    100
}
fn default_mode() -> ReproducingMode {
    ReproducingMode::Grid
}
fn default_reproducing_size() -> usize {
    100
}
fn default_reproducing_targets() -> usize {
    25
}
fn default_surface_resolution() -> usize {
    24
}
fn default_boundary_targets() -> usize {
    10
}
fn default_k0_bases() -> usize {
    1250
}
fn default_samples() -> usize {
    5000
}
fn default_alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_depths() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_slot() -> SchurSlotName {
    SchurSlotName::W
}
fn default_model_dims() -> Vec<usize> {
    vec![1, 2]
}
fn default_gamma_resolution() -> usize {
    40
}
fn default_abs_resolutions() -> Vec<usize> {
    vec![40, 80]
}
fn default_abs_shells() -> usize {
    8
}
fn default_p_list() -> Vec<f64> {
    vec![4.0 / 3.0, 2.0, 4.0]
}
fn default_density_function() -> DensityFunction {
    DensityFunction::BoundaryPower { beta: 0.25 }
}
fn default_density_n() -> Vec<usize> {
    vec![4, 16, 64]
}
fn default_density_p() -> f64 {
    2.0
}
fn default_oracle_cap() -> usize {
    12
}
fn default_point_modulus() -> f64 {
    0.5
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::BallExactness { .. } => "ball-exactness",
            Experiment::Reproducing { .. } => "reproducing",
            Experiment::BoundaryFormula { .. } => "boundary-formula",
            Experiment::K0Law { .. } => "k0-law",
            Experiment::SizeEstimate { .. } => "size-estimate",
            Experiment::ConjugateSymmetry { .. } => "conjugate-symmetry",
            Experiment::Schur { .. } => "schur",
            Experiment::SchurPoints { .. } => "schur-points",
            Experiment::ModelIntegral { .. } => "model-integral",
            Experiment::GammaUniformity { .. } => "gamma-uniformity",
            Experiment::DefectDecay { .. } => "defect-decay",
            Experiment::AbsBergman { .. } => "abs-bergman",
            Experiment::Opnorm { .. } => "opnorm",
            Experiment::Density { .. } => "density",
            Experiment::Oracle { .. } => "oracle",
        }
    }

    /// The experiment with every parameter at its default, by name.
    pub fn by_name(name: &str) -> Result<Self, ConfigError> {
        let value = serde_json::json!({ "kind": name });
        serde_json::from_value(value).map_err(|e| ConfigError(format!("unknown experiment '{name}': {e}")))
    }
}

/// Parse a configuration document, naming the offending key on failure.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("invalid config at '{path}': {}", e.into_inner()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Checks that do not need any computation.
pub fn validate_config(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.name.is_empty() || cfg.name.contains(['/', '\\']) {
        return Err(ConfigError(format!("invalid config at 'name': '{}' is not a plain directory name", cfg.name)));
    }
    if let Some(i) = cfg.eps.iter().position(|e| !(*e > 0.0)) {
        return Err(ConfigError(format!("invalid config at 'eps[{i}]': epsilon must be > 0")));
    }
    for (c, campaign) in cfg.campaigns.iter().enumerate() {
        if let Some(i) = campaign.eps.iter().flatten().position(|e| !(*e > 0.0)) {
            return Err(ConfigError(format!("invalid config at 'campaigns[{c}].eps[{i}]': epsilon must be > 0")));
        }
    }
    if cfg.threads == Some(0) {
        return Err(ConfigError("invalid config at 'threads': must be >= 1".into()));
    }
    if cfg.campaigns.is_empty() {
        return Err(ConfigError("invalid config at 'campaigns': nothing to run".into()));
    }
    for (i, c) in cfg.campaigns.iter().enumerate() {
        let empty = match &c.experiment {
            Experiment::BallExactness { dims, .. } | Experiment::ModelIntegral { dims, .. } => dims.is_empty(),
            Experiment::Schur { alphas, depths, .. } | Experiment::SchurPoints { alphas, depths, .. } => {
                alphas.is_empty() || depths.is_empty()
            }
            Experiment::AbsBergman { resolutions, p, .. } => resolutions.is_empty() || p.is_empty(),
            Experiment::Opnorm { p, .. } => p.is_empty(),
            Experiment::Density { n, .. } => n.is_empty(),
            _ => false,
        };
        if empty {
            return Err(ConfigError(format!("invalid config at 'campaigns[{i}].experiment': empty parameter list")));
        }
    }
    let domains = std::iter::once(("domain".to_string(), &cfg.domain)).chain(
        cfg.campaigns
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.domain.as_ref().map(|d| (format!("campaigns[{i}].domain"), d))),
    );
    for (key, d) in domains {
        d.build::<f64>().map_err(|e| ConfigError(format!("invalid config at '{key}': {e}")))?;
    }
    Ok(())
}

fn disc() -> DomainConfig {
    DomainConfig::ball(1)
}

/// Small resolutions on the ball; every gate passes in well under a minute.
pub fn ball_smoke() -> RunConfig {
    let mut th = Thresholds::default();
    // coarse grids: the |B| estimates still move between 16 and 24 nodes per circle
    th.abs_stability = 0.3;
    RunConfig {
        name: "ball-smoke".into(),
        domain: DomainConfig::ball(2),
        eps: vec![0.1, 0.05],
        thresholds: th,
        campaigns: vec![
            Campaign::new(Experiment::BallExactness { dims: vec![1, 2, 3], pairs: 20 }),
            Campaign::new(Experiment::Reproducing {
                mode: ReproducingMode::Grid,
                size: 40,
                targets: 10,
                monomials: vec![vec![0], vec![1], vec![3]],
            })
            .on(disc()),
            Campaign::new(Experiment::BoundaryFormula { resolution: 12, targets: 4 }),
            Campaign::new(Experiment::K0Law { base_points: 50 }),
            Campaign::new(Experiment::SizeEstimate { samples: 500 }),
            Campaign::new(Experiment::ConjugateSymmetry { samples: 200 }),
            Campaign::new(Experiment::Schur {
                alphas: vec![0.75],
                depths: vec![1e-1, 1e-2],
                graded: GradedOptions::default(),
            })
            .on(disc()),
            Campaign::new(Experiment::ModelIntegral { dims: vec![1], alphas: vec![0.5] }),
            Campaign::new(Experiment::GammaUniformity { resolution: 12 }).on(disc()),
            Campaign::new(Experiment::DefectDecay {
                options: DefectOptions { nodes_per_radius: 1.0, shells: 3, modulus_samples: 50, ..Default::default() },
            })
            .on(disc()),
            Campaign::new(Experiment::AbsBergman { resolutions: vec![16, 24], shells: 4, p: vec![2.0] }).on(disc()),
            Campaign::new(Experiment::Density {
                function: DensityFunction::BoundaryPower { beta: 0.25 },
                n: vec![2, 16],
                p: 2.0,
                options: DensityOptions {
                    target_resolution: 12,
                    source_nodes_per_n: 4,
                    min_source_resolution: 24,
                    radial_panels: 2,
                    shells: 6,
                },
            })
            .on(disc()),
            Campaign::new(Experiment::Oracle { degree_cap: 12, slope_caps: Some((4, 12)), point_modulus: 0.5 })
                .on(disc()),
        ],
        ..Default::default()
    }
}

/// Every campaign at the resolutions of the acceptance suite.
pub fn full_desk() -> RunConfig {
    let pert2 = DomainConfig::perturbed_ball(2, 0.3);
    let ell = DomainConfig::ellipsoid(&[1.0, 2.0]);
    let mut campaigns = vec![
        Campaign::new(Experiment::BallExactness { dims: vec![1, 2, 3], pairs: 100 }),
        Campaign::new(Experiment::Reproducing {
            mode: ReproducingMode::Grid,
            size: 100,
            targets: 25,
            monomials: Vec::new(),
        })
        .on(disc()),
        Campaign::new(Experiment::Reproducing {
            mode: ReproducingMode::MonteCarlo,
            size: 1_000_000,
            targets: 20,
            monomials: Vec::new(),
        })
        .on(DomainConfig::ball(2)),
        Campaign::new(Experiment::BoundaryFormula { resolution: 24, targets: 10 }).on(DomainConfig::ball(2)),
    ];
    for d in [DomainConfig::ball(2), ell.clone(), pert2.clone()] {
        campaigns.push(Campaign::new(Experiment::K0Law { base_points: 1250 }).on(d));
    }
    for d in [DomainConfig::ball(2), ell] {
        campaigns.push(Campaign::new(Experiment::SizeEstimate { samples: 5000 }).on(d).eps(&[0.1, 0.05, 0.01]));
    }
    campaigns.push(
        Campaign::new(Experiment::SizeEstimate { samples: 5000 }).on(pert2.clone()).with_mu(0.8).eps(&[0.1, 0.05, 0.01]),
    );
    campaigns.push(
        Campaign::new(Experiment::ConjugateSymmetry { samples: 5000 })
            .on(pert2)
            .with_mu(0.8)
            .eps(&[0.08, 0.04, 0.02, 0.01]),
    );
    for d in [disc(), DomainConfig::ball(2)] {
        campaigns.push(
            Campaign::new(Experiment::Schur {
                alphas: default_alphas(),
                depths: default_depths(),
                graded: GradedOptions::default(),
            })
            .on(d),
        );
    }
    campaigns.extend([
        Campaign::new(Experiment::ModelIntegral { dims: vec![1, 2], alphas: default_alphas() }),
        Campaign::new(Experiment::GammaUniformity { resolution: 40 }).on(disc()).eps(&[0.1, 0.05, 0.01]),
        Campaign::new(Experiment::DefectDecay { options: DefectOptions::default() })
            .on(DomainConfig::perturbed_ball(1, 0.3))
            .with_mu(0.8),
        Campaign::new(Experiment::DefectDecay { options: DefectOptions::default() }).on(disc()),
        Campaign::new(Experiment::AbsBergman { resolutions: vec![40, 80], shells: 8, p: default_p_list() }).on(disc()),
        Campaign::new(Experiment::Density {
            function: default_density_function(),
            n: default_density_n(),
            p: 2.0,
            options: DensityOptions::default(),
        })
        .on(disc()),
        Campaign::new(Experiment::Oracle { degree_cap: 40, slope_caps: Some((10, 40)), point_modulus: 0.7 }).on(disc()),
        Campaign::new(Experiment::Oracle { degree_cap: 12, slope_caps: Some((6, 12)), point_modulus: 0.5 })
            .on(DomainConfig::ball(2)),
    ]);
    RunConfig {
        name: "full-desk".into(),
        domain: DomainConfig::ball(2),
        eps: vec![0.1, 0.05, 0.025],
        campaigns,
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    match name {
        "ball-smoke" => Ok(ball_smoke()),
        "full-desk" => Ok(full_desk()),
        other => Err(ConfigError(format!("unknown preset '{other}' (expected ball-smoke or full-desk)"))),
    }
}
