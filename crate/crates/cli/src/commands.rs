use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use serde_json::json;

use msc_core::ar::{coordinate, ArConfig, ArModel};
use msc_core::baselines::{
    default_burn_in, run_rwm_with, run_single_chain_gibbs, start_from_atoms, ChainRunResult, RwmCovariance,
    RwmSettings,
};
use msc_core::bounds::{self, pg_mse_bound, GeometricBoundInput, PgBoundMode};
use msc_core::logit::{coefficients, load_heart_dataset, HeartData, HeartOptions, LogitModel, LogitPosterior};
use msc_core::polya_gamma::{polya_gamma_mean, sample_polya_gamma};
use msc_core::{build_initial_distribution, derive_stream, msc_estimate, EngineConfig, MscResult};

use crate::config::{Config, LogitSection, ProposalChoice, RwmCovarianceChoice, StartChoice};
use crate::error::CliError;
use crate::output::{self, EstimateRow};

pub const RUN_AR: &str = "run-ar";
pub const RUN_LOGIT: &str = "run-logit";
pub const BASELINE_GIBBS: &str = "baseline-gibbs";
pub const BASELINE_RWM: &str = "baseline-rwm";
pub const PLAN: &str = "plan";
pub const PG_SELFTEST: &str = "pg-selftest";

/// Largest |z| a self-test mean may show before the command fails.
const SELFTEST_Z: f64 = 4.0;

/// A validated config plus the resolved overrides.
pub struct Context {
    pub config: Config,
    pub workers: usize,
}

impl Context {
    fn engine(&self) -> EngineConfig {
        EngineConfig {
            workers: self.workers,
            cap: self.config.cap,
        }
    }

    fn command_dir(&self, command: &str) -> Result<PathBuf, CliError> {
        let dir = self.config.output_dir.join(command);
        output::ensure_dir(&dir)?;
        Ok(dir)
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }
}

fn msc_rows(res: &MscResult) -> Vec<EstimateRow> {
    res.function_names
        .iter()
        .zip(res.estimates.iter().zip(&res.stderrs))
        .map(|(f, (&estimate, &stderr))| EstimateRow {
            function: f.clone(),
            estimate,
            stderr,
        })
        .collect()
}

fn msc_diagnostics(res: &MscResult, runtime: f64) -> serde_json::Value {
    json!({
        "n": res.n,
        "m": res.m,
        "ess": res.ess,
        "w2_hat": res.w2_hat,
        "skip_fraction": res.skip_fraction,
        "mean_tau": res.mean_tau,
        "p95_tau": res.p95_tau,
        "runtime_seconds": runtime,
    })
}

fn merge(mut a: serde_json::Value, b: serde_json::Value) -> serde_json::Value {
    if let (Some(a), serde_json::Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

pub fn plan(ctx: &Context) -> Result<(), CliError> {
    let p = ctx.config.section(&ctx.config.plan, "plan")?;
    let dir = ctx.command_dir(PLAN)?;
    let mut rows = Vec::new();
    for d in p.d_min..=p.d_max {
        let c = bounds::ar_constants(p.rho, d, p.h, p.r)?;
        let drift = c.drift()?;
        let plan = bounds::plan_sizes(p.eps, p.delta, c.gamma, c.k, c.r, c.w2, c.sup_v_c)?;
        rows.push(vec![
            d.to_string(),
            c.gamma.to_string(),
            c.k.to_string(),
            c.r.to_string(),
            drift.gamma_r().to_string(),
            c.w2.to_string(),
            plan.n.to_string(),
            plan.m.to_string(),
        ]);
    }
    let header = ["d", "gamma", "K", "R", "gamma_R", "w2", "N_required", "M_required"];
    output::write_csv(&dir.join(output::PLAN_FILE), &header, &rows)?;
    println!("{}", header.join(","));
    for r in &rows {
        println!("{}", r.join(","));
    }
    output::write_config_echo(&dir, &ctx.config)?;
    Ok(())
}

pub fn run_ar(ctx: &Context) -> Result<(), CliError> {
    let a = ctx.config.section(&ctx.config.ar, "ar")?;
    let dir = ctx.command_dir(RUN_AR)?;
    let model = ArModel::new(ArConfig {
        rho: a.rho,
        d: a.d,
        h: a.h,
        r: a.r,
    })?;
    let cfg = ctx.engine();
    let t = Instant::now();
    let atoms = build_initial_distribution(&model, a.n, ctx.seed(), &cfg)?;
    let functions: Vec<_> = (0..a.d).map(coordinate).collect();
    let res = msc_estimate(&model, &atoms, a.m, &functions, ctx.seed(), &cfg)?;
    let runtime = t.elapsed().as_secs_f64();

    let c = model.constants();
    let drift = c.drift()?;
    let input = GeometricBoundInput::new(&drift, a.m, a.n, c.w2, c.sup_v_c);
    let diag = merge(
        msc_diagnostics(&res, runtime),
        json!({
            "model": "ar",
            "gamma": c.gamma,
            "K": c.k,
            "R": c.r,
            "gamma_R": drift.gamma_r(),
            "w2": c.w2,
            "return_sum_bound": bounds::return_sum_bound(&drift, c.sup_v_c)?,
            "mse_bound": bounds::mse_bound(&input)?,
        }),
    );
    output::write_estimates(&dir, &msc_rows(&res))?;
    output::write_excursions(&dir, &res.taus)?;
    output::write_json(&dir.join(output::DIAGNOSTICS_FILE), &diag)?;
    output::write_config_echo(&dir, &ctx.config)?;
    print_estimates("MSC", &msc_rows(&res));
    info!("ess = {:.1}, mean tau = {:.3}, runtime {runtime:.2}s", res.ess, res.mean_tau);
    Ok(())
}

fn load_logit(l: &LogitSection) -> Result<(HeartData, LogitPosterior), CliError> {
    let data = load_heart_dataset(&l.data_path, HeartOptions { standardize: l.standardize })?;
    let post = LogitPosterior::with_isotropic_prior(data.dataset.clone(), l.sigma_scale, l.h)?;
    Ok((data, post))
}

fn logit_model(l: &LogitSection, post: LogitPosterior) -> Result<LogitModel, CliError> {
    Ok(match l.proposal {
        ProposalChoice::Prior => LogitModel::new(post, l.r)?,
        ProposalChoice::Laplace => {
            let q = post.laplace_proposal(l.laplace_inflation)?;
            LogitModel::with_proposal(post, l.r, q)?
        }
    })
}

fn data_diagnostics(data: &HeartData) -> serde_json::Value {
    json!({
        "data_rows_read": data.raw_rows,
        "data_rows_dropped": data.dropped_rows,
        "data_rows_used": data.dataset.n(),
        "covariates": data.dataset.d(),
        "reference_covariates": msc_core::logit::REFERENCE_COVARIATES,
        "column_names": data.dataset.column_names,
        "standardization": data.standardization.as_ref().map(|s| json!({
            "means": s.means,
            "scales": s.scales,
        })),
    })
}

pub fn run_logit(ctx: &Context) -> Result<(), CliError> {
    let l = ctx.config.section(&ctx.config.logit, "logit")?;
    let dir = ctx.command_dir(RUN_LOGIT)?;
    let (data, post) = load_logit(l)?;
    let t = Instant::now();
    let model = logit_model(l, post)?;
    let cfg = ctx.engine();
    let atoms = build_initial_distribution(&model, l.n, ctx.seed(), &cfg)?;
    if atoms.ess < 0.01 * l.n as f64 {
        warn!("importance weights are degenerate: ESS = {:.1} of N = {}", atoms.ess, l.n);
    }
    let res = msc_estimate(&model, &atoms, l.m, &coefficients(&data.dataset), ctx.seed(), &cfg)?;
    let runtime = t.elapsed().as_secs_f64();

    let pg = model.constants();
    let diag = merge(
        merge(msc_diagnostics(&res, runtime), data_diagnostics(&data)),
        json!({
            "model": "logit",
            "proposal": l.proposal,
            "beta_star": model.posterior().beta_star()?.as_slice(),
            "L": pg.l,
            "R": pg.r,
            "K": pg.k,
            "K_with_trace": pg.k_with_trace,
            "gamma_R": pg.gamma_r,
            "log_w_d": pg.log_w_d,
            "log_chi2_bound": pg.log_chi2_bound,
            "mse_bound": pg_mse_bound(pg, l.m, l.n, PgBoundMode::Theorem)?,
            "mse_bound_as_printed": pg_mse_bound(pg, l.m, l.n, PgBoundMode::Literal)?,
        }),
    );
    output::write_estimates(&dir, &msc_rows(&res))?;
    output::write_excursions(&dir, &res.taus)?;
    output::write_json(&dir.join(output::DIAGNOSTICS_FILE), &diag)?;
    output::write_config_echo(&dir, &ctx.config)?;
    print_estimates("MSC", &msc_rows(&res));
    info!(
        "ess = {:.1}, w2_hat = {:.3}, mean tau = {:.3}, runtime {runtime:.2}s",
        res.ess, res.w2_hat, res.mean_tau
    );
    compare_report(&ctx.config.output_dir)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Gibbs,
    Rwm,
}

pub fn baseline(ctx: &Context, which: Baseline) -> Result<(), CliError> {
    let l = ctx.config.section(&ctx.config.logit, "logit")?;
    let b = ctx.config.section(&ctx.config.baseline, "baseline")?;
    let name = match which {
        Baseline::Gibbs => BASELINE_GIBBS,
        Baseline::Rwm => BASELINE_RWM,
    };
    let dir = ctx.command_dir(name)?;
    let (data, post) = load_logit(l)?;
    let burn_in = b.burn_in.unwrap_or_else(|| default_burn_in(b.steps));

    let t = Instant::now();
    let (post, start): (LogitPosterior, DVector<f64>) = match b.start {
        StartChoice::Mode => {
            let s = post.beta_star()?.clone();
            (post, s)
        }
        StartChoice::Atoms => {
            let model = logit_model(l, post)?;
            let atoms = build_initial_distribution(&model, l.n, ctx.seed(), &ctx.engine())?;
            let s = start_from_atoms(&atoms, ctx.seed())?;
            (model.into_posterior(), s)
        }
    };
    let res: ChainRunResult = match which {
        Baseline::Gibbs => run_single_chain_gibbs(&post, b.steps, burn_in, &start, ctx.seed())?,
        Baseline::Rwm => {
            let settings = RwmSettings {
                covariance: match b.rwm_covariance {
                    RwmCovarianceChoice::Laplace => RwmCovariance::Laplace,
                    RwmCovarianceChoice::Proposal => RwmCovariance::Proposal,
                },
                scale_override: b.rwm_scale_override,
            };
            run_rwm_with(&post, b.steps, burn_in, &start, ctx.seed(), settings)?
        }
    };
    let runtime = t.elapsed().as_secs_f64();

    let rows: Vec<EstimateRow> = data
        .dataset
        .column_names
        .iter()
        .zip(res.means.iter().zip(&res.stderrs))
        .map(|(f, (&estimate, &stderr))| EstimateRow {
            function: f.clone(),
            estimate,
            stderr,
        })
        .collect();
    let diag = merge(
        data_diagnostics(&data),
        json!({
            "model": name,
            "n_steps": res.n_steps,
            "burn_in": res.burn_in,
            "acceptance_rate": res.acceptance_rate,
            "start": start.as_slice(),
            "runtime_seconds": runtime,
        }),
    );
    output::write_estimates(&dir, &rows)?;
    output::write_json(&dir.join(output::DIAGNOSTICS_FILE), &diag)?;
    output::write_config_echo(&dir, &ctx.config)?;
    print_estimates(name, &rows);
    if let Some(a) = res.acceptance_rate {
        info!("acceptance rate {a:.3}");
    }
    compare_report(&ctx.config.output_dir)
}

pub fn pg_selftest(ctx: &Context) -> Result<(), CliError> {
    let s = ctx.config.selftest.clone().unwrap_or_default();
    let dir = ctx.command_dir(PG_SELFTEST)?;
    let t = Instant::now();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut failed = Vec::new();
    for (i, &b) in s.b.iter().enumerate() {
        let mut stream = derive_stream(ctx.seed(), PG_SELFTEST, i as u64);
        let xs: Vec<f64> = (0..s.draws)
            .map(|_| sample_polya_gamma(&mut stream, b))
            .collect::<Result<_, _>>()?;
        let (mean, sd) = msc_core::stats::mean_and_sd(&xs);
        let se = sd / (s.draws as f64).sqrt();
        let exact = polya_gamma_mean(b);
        let z = (mean - exact) / se;
        if z.abs() > SELFTEST_Z {
            failed.push(b);
        }
        println!("PG(1, {b}): mean {mean:.6} ± {se:.6}, exact {exact:.6}, z = {z:+.2}");
        rows.push(EstimateRow {
            function: format!("pg_mean_b{b}"),
            estimate: mean,
            stderr: se,
        });
        checks.push(json!({"b": b, "mean": mean, "stderr": se, "exact_mean": exact, "z": z}));
    }
    output::write_estimates(&dir, &rows)?;
    output::write_json(
        &dir.join(output::DIAGNOSTICS_FILE),
        &json!({
            "draws": s.draws,
            "checks": checks,
            "z_threshold": SELFTEST_Z,
            "passed": failed.is_empty(),
            "runtime_seconds": t.elapsed().as_secs_f64(),
        }),
    )?;
    output::write_config_echo(&dir, &ctx.config)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(format!("sample mean off by more than {SELFTEST_Z} stderr at b = {failed:?}")))
    }
}

fn print_estimates(label: &str, rows: &[EstimateRow]) {
    println!("{label} estimates:");
    for r in rows {
        println!("  {:<12} {:>14.6} ± {:.6}", r.function, r.estimate, r.stderr);
    }
}

/// Side-by-side MSC / Gibbs / RWM means from whichever of the three result
/// files exist under `out`. Needs at least two.
pub fn compare_report(out: &Path) -> Result<(), CliError> {
    let sources = [RUN_LOGIT, BASELINE_GIBBS, BASELINE_RWM];
    let found: Vec<(&str, Vec<EstimateRow>)> = sources
        .iter()
        .filter_map(|s| {
            let p = out.join(s).join(output::ESTIMATES_FILE);
            p.exists().then(|| output::read_estimates(&p).map(|r| (*s, r)))
        })
        .collect::<Result<_, _>>()?;
    if found.len() < 2 {
        return Ok(());
    }
    let names: Vec<&str> = found[0].1.iter().map(|r| r.function.as_str()).collect();
    if found.iter().any(|(_, rows)| rows.len() != names.len() || rows.iter().zip(&names).any(|(r, n)| r.function != *n)) {
        warn!("compare: result files under {} cover different coefficients; skipped", out.display());
        return Ok(());
    }
    let mut header = vec!["function".to_string()];
    for (s, _) in &found {
        header.push(format!("{s}_mean"));
        header.push(format!("{s}_stderr"));
    }
    header.push("max_pairwise_z".into());
    let mut rows = Vec::new();
    println!("compare ({}):", found.iter().map(|(s, _)| *s).collect::<Vec<_>>().join(" vs "));
    for (j, name) in names.iter().enumerate() {
        let vals: Vec<(f64, f64)> = found.iter().map(|(_, r)| (r[j].estimate, r[j].stderr)).collect();
        let mut zmax: f64 = 0.0;
        for a in 0..vals.len() {
            for b in a + 1..vals.len() {
                let z = (vals[a].0 - vals[b].0).abs() / (vals[a].1.powi(2) + vals[b].1.powi(2)).sqrt();
                zmax = zmax.max(z);
            }
        }
        let mut row = vec![name.to_string()];
        let mut line = format!("  {name:<12}");
        for (m, s) in &vals {
            row.push(m.to_string());
            row.push(s.to_string());
            line.push_str(&format!(" {m:>12.5} ± {s:<10.5}"));
        }
        row.push(zmax.to_string());
        println!("{line} max z {zmax:.2}");
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    output::write_csv(&out.join(output::COMPARE_FILE), &header, &rows)
}
