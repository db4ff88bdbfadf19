//! Campaign dispatch and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use cfkernel::domain::{DomainConfig, DomainKindName};
use cfkernel::operators::{
    abs_operator, assemble, b1_operator, b1_square, defect_a_eps, estimate_norm, gamma_operator, schur_integrals,
    staggered_rule, Targets, TruncationProfile,
};
use cfkernel::oracle::ball_kernel;
use cfkernel::quadrature::{volume_rule_with, Point, VolumeOptions};
use cfkernel::verification::*;
use cfkernel::Context;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{Campaign, Experiment, OperatorName, ReproducingMode, RunConfig};

pub const OUTPUT_ROOT_ENV: &str = "CFK_OUTPUT_ROOT";

/// Everything written to report.json. No wall-clock fields, so re-running an
/// archived effective config reproduces the file byte for byte.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub thresholds_version: u32,
    pub passed: bool,
    pub campaigns: Vec<ValidationReport>,
}

pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    match &cfg.output_dir {
        Some(d) => d.clone(),
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("cfk-output"));
            root.join(&cfg.name)
        }
    }
}

fn default_monomials(dim: usize) -> Vec<Vec<u32>> {
    match dim {
        1 => (0..=6).map(|k| vec![k]).collect(),
        2 => vec![vec![0, 0], vec![1, 0], vec![1, 2]],
        n => vec![vec![0; n], std::iter::once(1).chain(std::iter::repeat(0).take(n - 1)).collect()],
    }
}

fn e1_ray(ctx: &Context, depth: f64) -> Point {
    let n = ctx.dim();
    let mut e1: Point = (0..n).map(|_| Complex64::new(0.0, 0.0)).collect();
    e1[0] = Complex64::new(1.0, 0.0);
    let r = ctx.domain.radial_extent(&e1);
    e1.iter().map(|x| x * (r * (1.0 - depth))).collect()
}

/// Experiments built on the closed-form ball kernel need a ball.
fn ball_dim(domain: &DomainConfig) -> Result<usize> {
    match (domain.kind, domain.dim) {
        (DomainKindName::Ball, Some(n)) => Ok(n),
        _ => Err(cfkernel::Error::UnsupportedDomain(format!("{domain:?}: this experiment needs the unit ball")).into()),
    }
}

/// Runs one campaign on its resolved domain and context.
pub fn run_campaign(cfg: &RunConfig, campaign: &Campaign) -> Result<ValidationReport> {
    let th = &cfg.thresholds;
    let seed = cfg.seed;
    let domain: &DomainConfig = campaign.domain.as_ref().unwrap_or(&cfg.domain);
    let eps: &[f64] = campaign.eps.as_deref().unwrap_or(&cfg.eps);
    let ctx = || -> Result<Context> { Ok(campaign.context.as_ref().unwrap_or(&cfg.context).build(domain)?) };
    let report = match &campaign.experiment {
        Experiment::BallExactness { dims, pairs } => validate_ball_exactness(dims, *pairs, seed, th)?,
        Experiment::Reproducing { mode, size, targets, monomials } => {
            let ctx = ctx()?;
            let mons = if monomials.is_empty() { default_monomials(ctx.dim()) } else { monomials.clone() };
            match mode {
                ReproducingMode::Grid => {
                    let rule = cfkernel::quadrature::volume_rule(&ctx.domain, *size, 0.5, seed)?;
                    let pts = cfkernel::operators::interior_targets(&ctx.domain, *targets, 0.7, seed ^ 0x77);
                    validate_reproducing(&ctx, &mons, &ReproducingRule::Grid(rule), &pts, th.reproducing_grid)?
                }
                ReproducingMode::MonteCarlo => {
                    let (rule, pts) = if matches!(ctx.domain.kind(), cfkernel::domain::ModelKind::Ball) && ctx.dim() == 2 {
                        let (_, rule, pts) = ball2_monte_carlo_setup(*size, *targets, 0.3, 0.6, seed)?;
                        (rule, pts)
                    } else {
                        let rule = cfkernel::quadrature::monte_carlo_rule(&ctx.domain, *size, seed)?;
                        (rule, cfkernel::operators::interior_targets(&ctx.domain, *targets, 0.6, seed ^ 0x99))
                    };
                    validate_reproducing(&ctx, &mons, &ReproducingRule::Streaming(rule), &pts, th.reproducing_monte_carlo)?
                }
            }
        }
        Experiment::BoundaryFormula { resolution, targets } => {
            let ctx = ctx()?;
            let rule = cfkernel::quadrature::surface_rule(&ctx.domain, *resolution)?;
            let pts = cfkernel::operators::interior_targets(&ctx.domain, *targets, 0.6, seed);
            let mons = vec![vec![0; ctx.dim()], std::iter::once(1).chain(std::iter::repeat(0).take(ctx.dim() - 1)).collect()];
            validate_boundary_formula(&ctx, &mons, &rule, &pts, th.boundary_formula)?
        }
        Experiment::K0Law { base_points } => validate_k0_law(&ctx()?, *base_points, seed, th)?,
        Experiment::SizeEstimate { samples } => validate_size_estimate(&ctx()?, eps, *samples, seed, th)?,
        Experiment::ConjugateSymmetry { samples } => validate_conjugate_symmetry(&ctx()?, eps, *samples, seed, th)?,
        Experiment::Schur { alphas, depths, graded } => validate_schur(&ctx()?, alphas, depths, graded, th)?,
        Experiment::SchurPoints { alphas, depths, slot, graded } => {
            let ctx = ctx()?;
            let mut r = ValidationReport::new(
                "schur_points",
                ctx.domain.name(),
                depths.len(),
                0,
                &["alpha", "depth", "rho_z", "integral", "coarse", "product"],
            );
            r.param("slot", json!(slot));
            r.param("graded", serde_json::to_value(graded)?);
            for &d in depths {
                let z = e1_ray(&ctx, d);
                for v in schur_integrals(&ctx, graded, &z, alphas, (*slot).into())? {
                    let product = v.value * v.rho_z.abs().powf(v.alpha);
                    r.row(vec![v.alpha, d, v.rho_z, v.value, v.coarse, product]);
                    r.check_finite(format!("alpha={} depth={d:e}", v.alpha), v.value);
                }
            }
            r
        }
        Experiment::ModelIntegral { dims, alphas } => {
            let cutoff = |n: usize| if n == 1 { 1e4 } else { 1e3 };
            let mut out = validate_model_integral(&dims[..1], alphas, cutoff(dims[0]), th)?;
            for &n in &dims[1..] {
                out.merge(&validate_model_integral(&[n], alphas, cutoff(n), th)?);
            }
            out.param("dims", json!(dims));
            out
        }
        Experiment::GammaUniformity { resolution } => {
            validate_gamma_uniformity(&ctx()?, eps, &VolumeOptions::with_resolution(*resolution), th)?
        }
        Experiment::DefectDecay { options } => validate_defect_decay(&ctx()?, eps, options, th)?,
        Experiment::AbsBergman { resolutions, shells, p } => {
            validate_abs_bergman(ball_dim(domain)?, resolutions, *shells, p, seed, th)?
        }
        Experiment::Opnorm { op, p, resolution } => opnorm(&ctx()?, *op, eps, p, *resolution, seed)?,
        Experiment::Density { function, n, p, options } => density_experiment(&ctx()?, *function, n, *p, options, th)?,
        Experiment::Oracle { degree_cap, slope_caps, point_modulus } => {
            let dim = ball_dim(domain)?;
            let caps = slope_caps.unwrap_or(((degree_cap / 4).max(1), *degree_cap));
            validate_oracle(dim, *degree_cap, caps, *point_modulus, seed, th)?
        }
    };
    Ok(report)
}

/// Estimates ‖T‖_{L^p → L^p} of one operator on a fixed grid for every ε and p.
fn opnorm(ctx: &Context, op: OperatorName, eps: &[f64], p_list: &[f64], resolution: usize, seed: u64) -> Result<ValidationReport> {
    let opts = VolumeOptions::with_resolution(resolution);
    let rule = volume_rule_with(&ctx.domain, &opts)?;
    let targets = Targets::from_rule(&staggered_rule(&ctx.domain, &opts)?);
    let name = serde_json::to_value(op)?.as_str().unwrap_or("op").to_string();
    let mut report = ValidationReport::new(
        "opnorm",
        ctx.domain.name(),
        rule.len(),
        seed,
        &["epsilon", "p", "estimate", "lower_bound", "iterations"],
    );
    report.param("op", json!(name));
    report.param("rule", json!(rule.meta.label));
    let eps_grid: Vec<f64> = if matches!(op, OperatorName::AbsBergman) { vec![0.0] } else { eps.to_vec() };
    let radii = if matches!(op, OperatorName::Defect) { Some(cutoff_radii(ctx, eps, 400, seed)?) } else { None };
    for (k, &e) in eps_grid.iter().enumerate() {
        let ce = with_epsilon(ctx, e);
        let matrix = match op {
            OperatorName::Gamma => gamma_operator(&ce, &rule, &targets, true)?,
            OperatorName::B1 => b1_operator(&ce, &rule, &targets)?,
            OperatorName::Defect => {
                let r = radii.as_ref().map(|v| v[k].r.min(1.0)).unwrap_or(1.0);
                report.constant(&format!("r_eps{e}"), r);
                defect_a_eps(&b1_square(&ce, &rule)?, &TruncationProfile::new(r)?)?
            }
            OperatorName::AbsBergman => {
                let dim = ctx.dim();
                abs_operator(&assemble("bergman", &rule, &targets, false, |w, z| Ok(ball_kernel(dim, w, z)))?)
            }
        };
        for &p in p_list {
            let est = estimate_norm(&matrix, p, 4, seed)?;
            report.row(vec![e, p, est.value, f64::from(u8::from(est.lower_bound)), est.iterations as f64]);
            report.check_finite(format!("eps={e} p={p:.4}"), est.value);
        }
    }
    Ok(report)
}

fn csv_name(index: usize, report: &ValidationReport) -> String {
    let domain: String =
        report.domain.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
    format!("{:02}-{}-{}.csv", index + 1, report.id, domain.trim_matches('_'))
}

/// Writes report.json, one CSV per campaign, summary.txt and effective_config.json.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, run: &RunReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("effective_config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(run)? + "\n")?;
    for (i, r) in run.campaigns.iter().enumerate() {
        r.write_csv(&dir.join(csv_name(i, r)))?;
    }
    fs::write(dir.join("summary.txt"), summary(run))?;
    Ok(())
}

pub fn summary(run: &RunReport) -> String {
    let passed = run.campaigns.iter().filter(|r| r.passed).count();
    let mut out = format!(
        "{}: {} ({passed}/{} campaigns pass)\n",
        run.name,
        if run.passed { "PASS" } else { "FAIL" },
        run.campaigns.len()
    );
    for r in &run.campaigns {
        out.push_str(&r.summary());
    }
    out
}

pub fn execute(cfg: &RunConfig, mut progress: impl FnMut(usize, &ValidationReport)) -> Result<RunReport> {
    let mut campaigns = Vec::with_capacity(cfg.campaigns.len());
    for (i, c) in cfg.campaigns.iter().enumerate() {
        let r = run_campaign(cfg, c).with_context(|| format!("campaign {} ({})", i + 1, c.experiment.name()))?;
        progress(i, &r);
        campaigns.push(r);
    }
    Ok(RunReport {
        name: cfg.name.clone(),
        thresholds_version: cfg.thresholds.version,
        passed: campaigns.iter().all(|r| r.passed),
        campaigns,
    })
}
