//! `cfkernel`: run estimate campaigns, evaluate kernels, and replay archived runs.
//!
//! Exit status: 0 when every gate passes, 1 on gate failures, 2 on
//! configuration errors, 3 on internal errors.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use cfkernel::domain::{DomainConfig, DomainKindName};
use cfkernel::kernel::{k0_leading, kernel_b1};
use cfkernel::levi::{g, g_eps, size_proxy};
use cfkernel::quadrature::{GradedOptions, Point};
use cfkernel::verification::{with_epsilon, DensityFunction, DensityOptions};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use config::{Campaign, ConfigError, ContextConfig, Experiment, OperatorName, RunConfig, SchurSlotName};

#[derive(Parser, Debug)]
#[command(name = "cfkernel", version, about = "Cauchy–Fantappié kernels and Bergman-projection estimate campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run campaigns from a config file or preset; writes report.json, CSVs and summary.txt.
    #[command(alias = "run")]
    Validate(ValidateArgs),
    /// Evaluate g, g_ε and b¹_ε at one pair (w, z) and print JSON.
    KernelEval(KernelEvalArgs),
    /// Schur integrals along the normal ray through e₁.
    Schur(SchurArgs),
    /// Norm estimates of one operator over an ε × p grid.
    Opnorm(OpnormArgs),
    /// Re-run an archived run directory and compare report.json byte for byte.
    Reproduce(ReproduceArgs),
    /// L^p approximation of f by B¹(f·1_{D_{1/n}}).
    Density(DensityArgs),
    /// Print the summary of an existing run directory.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct DomainArgs {
    /// ball, ellipsoid or perturbed_ball.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Ellipsoid semi-axes, comma separated.
    #[arg(long, value_delimiter = ',')]
    axes: Option<Vec<f64>>,
    /// Perturbation size δ of the perturbed ball.
    #[arg(long)]
    delta: Option<f64>,
    /// Cutoff radius μ (local mode).
    #[arg(long)]
    mu: Option<f64>,
    /// Force global holomorphic mode on or off.
    #[arg(long)]
    global: Option<bool>,
}

impl DomainArgs {
    fn domain(&self) -> Result<Option<DomainConfig>, ConfigError> {
        let Some(kind) = &self.domain else {
            if self.dim.is_some() || self.axes.is_some() || self.delta.is_some() {
                return Err(ConfigError("--dim/--axes/--delta need --domain".into()));
            }
            return Ok(None);
        };
        let kind: DomainKindName = serde_json::from_value(json!(kind.replace('-', "_")))
            .map_err(|_| ConfigError(format!("--domain: unknown domain '{kind}' (ball, ellipsoid, perturbed_ball)")))?;
        // ball and perturbed ball default to the disc; the perturbation to δ = 0.3
        let dim = match kind {
            DomainKindName::Ellipsoid => self.dim,
            _ => Some(self.dim.unwrap_or(1)),
        };
        let delta = match kind {
            DomainKindName::PerturbedBall => Some(self.delta.unwrap_or(0.3)),
            _ => self.delta,
        };
        let d = DomainConfig { kind, dim, axes: self.axes.clone(), delta };
        d.build::<f64>().map_err(|e| ConfigError(format!("--domain: {e}")))?;
        Ok(Some(d))
    }

    fn context(&self) -> Option<ContextConfig> {
        (self.mu.is_some() || self.global.is_some())
            .then(|| ContextConfig { mu: self.mu, global: self.global, ..Default::default() })
    }
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[command(flatten)]
    domain: DomainArgs,
    /// ε list, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $CFK_OUTPUT_ROOT/<name>).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// ball-smoke or full-desk.
    #[arg(long)]
    preset: Option<String>,
    /// Replace the campaigns by these experiments at default settings (comma separated).
    #[arg(long, value_delimiter = ',')]
    experiment: Option<Vec<String>>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct KernelEvalArgs {
    #[command(flatten)]
    domain: DomainArgs,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Point as re,im pairs separated by ';', e.g. "0.3,0.1;-0.2,0.5".
    #[arg(long, allow_hyphen_values = true)]
    w: String,
    #[arg(long, allow_hyphen_values = true)]
    z: String,
}

#[derive(Args, Debug)]
struct SchurArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    alpha: Vec<f64>,
    /// Boundary distances along the ray.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3])]
    ray: Vec<f64>,
    /// Integrate |g(w, z)| (w) or |g(z, w)| (z).
    #[arg(long, default_value = "w")]
    slot: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct OpnormArgs {
    #[arg(long, value_enum)]
    op: OperatorName,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0])]
    p: Vec<f64>,
    /// Angular resolution of the volume grid.
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct DensityArgs {
    /// f = (1 − z₁)^(−β); β = 0 gives f ≡ 1.
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [4, 16, 64])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Archived run directory (contains effective_config.json and report.json).
    dir: PathBuf,
    /// Also write the fresh artifacts here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    dir: PathBuf,
}

fn apply_common(cfg: &mut RunConfig, common: &CommonArgs) -> Result<(), ConfigError> {
    if let Some(d) = common.domain.domain()? {
        cfg.domain = d;
        for c in &mut cfg.campaigns {
            c.domain = None;
        }
    }
    if let Some(c) = common.domain.context() {
        cfg.context = c;
    }
    if let Some(eps) = &common.eps {
        cfg.eps = eps.clone();
        for c in &mut cfg.campaigns {
            c.eps = None;
        }
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.output.is_some() {
        cfg.output_dir = common.output.clone();
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(())
}

fn single(name: &str, experiment: Experiment, common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig { name: name.into(), campaigns: vec![Campaign::new(experiment)], ..Default::default() };
    apply_common(&mut cfg, common)?;
    Ok(cfg)
}

fn parse_point(text: &str) -> Result<Point, ConfigError> {
    text.split(';')
        .map(|pair| {
            let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [re, im] => Ok(Complex64::new(
                    re.parse().map_err(|_| ConfigError(format!("bad coordinate '{pair}'")))?,
                    im.parse().map_err(|_| ConfigError(format!("bad coordinate '{pair}'")))?,
                )),
                _ => Err(ConfigError(format!("expected re,im but got '{pair}'"))),
            }
        })
        .collect()
}

/// Builds, runs and archives a configuration; Ok(true) iff every gate passes.
fn run_config(cfg: RunConfig) -> Result<bool> {
    config::validate_config(&cfg)?;
    if let Some(n) = cfg.threads {
        // a pool may already exist when called twice in one process; the bound then stays as first set
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = run::output_dir(&cfg);
    let report = run::execute(&cfg, |i, r| {
        eprintln!("[{}/{}] {} {} on {}", i + 1, cfg.campaigns.len(), if r.passed { "PASS" } else { "FAIL" }, r.id, r.domain);
    })?;
    run::write_artifacts(&dir, &cfg, &report)?;
    print!("{}", run::summary(&report));
    println!("artifacts: {}", dir.display());
    Ok(report.passed)
}

fn validate(args: ValidateArgs) -> Result<bool> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => config::load_config(path)?,
        (None, Some(p)) => config::preset(p)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(names) = &args.experiment {
        cfg.campaigns = names.iter().map(|n| Experiment::by_name(n).map(Campaign::new)).collect::<Result<_, _>>()?;
    }
    apply_common(&mut cfg, &args.common)?;
    run_config(cfg)
}

fn kernel_eval(args: KernelEvalArgs) -> Result<bool> {
    let domain = args.domain.domain()?.unwrap_or_else(|| DomainConfig::ball(2));
    let ctx = args.domain.context().unwrap_or_default().build(&domain)?;
    let ctx = with_epsilon(&ctx, args.eps);
    let (w, z) = (parse_point(&args.w)?, parse_point(&args.z)?);
    if w.len() != ctx.dim() || z.len() != ctx.dim() {
        return Err(ConfigError(format!("--w and --z need {} coordinates", ctx.dim())).into());
    }
    let c = |v: Complex64| json!({ "re": v.re, "im": v.im });
    let kv = kernel_b1(&ctx, &w, &z)?;
    let out = json!({
        "domain": ctx.domain.name(),
        "epsilon": ctx.epsilon,
        "mu": ctx.mu,
        "global_holomorphic_mode": ctx.global_holomorphic_mode,
        "value": c(kv.value),
        "numerator": c(kv.numerator),
        "denominator": c(kv.denominator),
        "g": c(g(&ctx, &w, &z)),
        "g_eps": c(g_eps(&ctx, &w, &z)),
        "k0": k0_leading(&ctx, &w),
        "size_proxy": size_proxy(&ctx, &w, &z),
        "rho_w": ctx.domain.rho(&w),
        "rho_z": ctx.domain.rho(&z),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(true)
}

fn reproduce(args: ReproduceArgs) -> Result<bool> {
    let cfg = config::load_config(&args.dir.join("effective_config.json"))?;
    let archived = std::fs::read_to_string(args.dir.join("report.json"))
        .with_context(|| format!("reading {}", args.dir.join("report.json").display()))?;
    config::validate_config(&cfg)?;
    let report = run::execute(&cfg, |_, _| {})?;
    let fresh = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(out) = &args.output {
        run::write_artifacts(out, &cfg, &report)?;
    }
    if fresh == archived {
        println!("report.json reproduced byte for byte ({} bytes)", fresh.len());
        Ok(true)
    } else {
        let line = fresh.lines().zip(archived.lines()).position(|(a, b)| a != b);
        println!("report.json differs (first differing line: {})", line.map_or("length".into(), |l| (l + 1).to_string()));
        Ok(false)
    }
}

fn report(args: ReportArgs) -> Result<bool> {
    let path = args.dir.join("report.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let passed = v["passed"].as_bool().unwrap_or(false);
    println!("{}: {}", v["name"].as_str().unwrap_or("?"), if passed { "PASS" } else { "FAIL" });
    for c in v["campaigns"].as_array().into_iter().flatten() {
        println!("  [{}] {} on {}", if c["passed"] == json!(true) { "PASS" } else { "FAIL" }, c["id"].as_str().unwrap_or("?"), c["domain"].as_str().unwrap_or("?"));
        for check in c["checks"].as_array().into_iter().flatten().filter(|k| k["passed"] == json!(false)) {
            println!("      FAIL {} = {} ({})", check["name"].as_str().unwrap_or("?"), check["value"], check["limit"].as_str().unwrap_or(""));
        }
    }
    Ok(passed)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::KernelEval(a) => kernel_eval(a),
        Command::Schur(a) => {
            let slot: SchurSlotName = serde_json::from_value(json!(a.slot))
                .map_err(|_| ConfigError(format!("--slot: expected w or z, got '{}'", a.slot)))?;
            let e = Experiment::SchurPoints { alphas: a.alpha, depths: a.ray, slot, graded: GradedOptions::default() };
            run_config(single("schur", e, &a.common)?)
        }
        Command::Opnorm(a) => {
            let e = Experiment::Opnorm { op: a.op, p: a.p, resolution: a.resolution };
            run_config(single("opnorm", e, &a.common)?)
        }
        Command::Density(a) => {
            let function = if a.beta == 0.0 {
                DensityFunction::Constant
            } else {
                DensityFunction::BoundaryPower { beta: a.beta }
            };
            let e = Experiment::Density { function, n: a.n, p: a.p, options: DensityOptions::default() };
            run_config(single("density", e, &a.common)?)
        }
        Command::Reproduce(a) => reproduce(a),
        Command::Report(a) => report(a),
    }
}

/// Configuration problems exit 2; anything else that fails is internal.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<cfkernel::Error>() {
            use cfkernel::Error::*;
            if matches!(
                e,
                InvalidParameter(_) | UnsupportedDomain(_) | NotInLp(_) | PerturbationTooLarge { .. } | NoAdmissibleDelta { .. }
            ) {
                return 2;
            }
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        let p = parse_point("0.3,0.1; -0.2,0.5").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1], Complex64::new(-0.2, 0.5));
        assert!(parse_point("0.3").is_err());
    }

    #[test]
    fn config_errors_name_the_key() {
        let err = config::parse_config(r#"{"campaigns": [{"experiment": {"kind": "schur", "alpha": [0.5]}}]}"#).unwrap_err();
        assert!(err.0.contains("campaigns[0].experiment"), "{}", err.0);
        let err = config::parse_config(r#"{"eps": "x"}"#).unwrap_err();
        assert!(err.0.contains("'eps'"), "{}", err.0);
    }

    #[test]
    fn presets_round_trip_and_validate() {
        for name in ["ball-smoke", "full-desk"] {
            let cfg = config::preset(name).unwrap();
            config::validate_config(&cfg).unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(config::parse_config(&text).unwrap(), cfg);
        }
        assert!(config::preset("nope").is_err());
    }

    #[test]
    fn experiments_have_defaults_by_name() {
        for name in ["ball-exactness", "k0-law", "schur", "density", "oracle", "defect-decay"] {
            assert_eq!(Experiment::by_name(name).unwrap().name(), name);
        }
        assert!(Experiment::by_name("opnorm").is_err(), "opnorm needs an operator");
        assert!(Experiment::by_name("bogus").is_err());
    }

    #[test]
    fn exit_codes_classify_errors() {
        let cfg: anyhow::Error = ConfigError("x".into()).into();
        assert_eq!(exit_code(&cfg), 2);
        let bad = anyhow::Error::from(cfkernel::Error::NotInLp("f".into())).context("campaign 1");
        assert_eq!(exit_code(&bad), 2);
        let internal = anyhow::Error::from(cfkernel::Error::SingularKernel { magnitude: 0.0 });
        assert_eq!(exit_code(&internal), 3);
    }
}
