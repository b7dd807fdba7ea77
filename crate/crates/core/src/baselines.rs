//! Long single-chain comparators: Pólya-Gamma Gibbs and random-walk
//! Metropolis on the logistic posterior.

use nalgebra::{DMatrix, DVector};

use crate::engine::WeightedAtoms;
use crate::error::{MscError, Result};
use crate::linalg;
use crate::logit::{pg_gibbs_step, LogitPosterior};
use crate::rng::{derive_stream, RngStream};
use crate::sampling::{std_normal_vector, AliasTable};

pub const GIBBS_LABEL: &str = "gibbs";
pub const RWM_LABEL: &str = "rwm";
pub const START_LABEL: &str = "baseline-start";

/// Roberts-Gelman-Gilks optimal scaling constant.
pub const OPTIMAL_SCALE: f64 = 2.38;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRunResult {
    pub means: Vec<f64>,
    /// Batch-means standard errors with `floor(sqrt(kept))` batches.
    pub stderrs: Vec<f64>,
    pub n_steps: usize,
    pub burn_in: usize,
    /// Random-walk Metropolis only.
    pub acceptance_rate: Option<f64>,
}

/// 10% of `steps`.
pub fn default_burn_in(steps: usize) -> usize {
    steps / 10
}

/// One draw from the weighted atoms, the same initial law the MSC chains use.
pub fn start_from_atoms<S: Clone>(atoms: &WeightedAtoms<S>, master_seed: u64) -> Result<S> {
    let table = AliasTable::new(&atoms.norm_weights)?;
    let mut stream = derive_stream(master_seed, START_LABEL, 0);
    Ok(atoms.atoms[table.sample(&mut stream)].clone())
}

/// Running per-coordinate sums and batch sums, so long chains need not be
/// stored. Matches [`crate::stats::batch_means_stderr`] on the same draws.
struct ChainSummary {
    kept: usize,
    batch_size: usize,
    batches: usize,
    seen: usize,
    totals: Vec<f64>,
    current: Vec<f64>,
    batch_means: Vec<Vec<f64>>,
}

impl ChainSummary {
    fn new(d: usize, kept: usize) -> Self {
        let batches = (kept as f64).sqrt().floor() as usize;
        ChainSummary {
            kept,
            batch_size: kept / batches.max(1),
            batches,
            seen: 0,
            totals: vec![0.0; d],
            current: vec![0.0; d],
            batch_means: vec![Vec::with_capacity(batches); d],
        }
    }

    fn push(&mut self, x: &DVector<f64>) {
        for (j, v) in x.iter().enumerate() {
            self.totals[j] += v;
        }
        if self.seen / self.batch_size.max(1) < self.batches {
            for (j, v) in x.iter().enumerate() {
                self.current[j] += v;
            }
            if (self.seen + 1) % self.batch_size == 0 {
                for (j, c) in self.current.iter_mut().enumerate() {
                    self.batch_means[j].push(*c / self.batch_size as f64);
                    *c = 0.0;
                }
            }
        }
        self.seen += 1;
    }

    fn finish(self) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(self.seen, self.kept);
        let means = self.totals.iter().map(|t| t / self.kept as f64).collect();
        let stderrs = self
            .batch_means
            .iter()
            .map(|b| {
                if self.batches < 2 {
                    return f64::NAN;
                }
                let (_, sd) = crate::stats::mean_and_sd(b);
                sd / (self.batches as f64).sqrt()
            })
            .collect();
        (means, stderrs)
    }
}

fn check_run(post: &LogitPosterior, steps: usize, burn_in: usize, start: &DVector<f64>) -> Result<()> {
    if steps <= burn_in {
        return Err(MscError::invalid(format!("steps ({steps}) must exceed burn_in ({burn_in})")));
    }
    if start.len() != post.d() {
        return Err(MscError::invalid(format!("start has length {}, expected {}", start.len(), post.d())));
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(MscError::invalid("non-finite start"));
    }
    Ok(())
}

fn drive(
    steps: usize,
    burn_in: usize,
    start: &DVector<f64>,
    mut step: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut summary = ChainSummary::new(start.len(), steps - burn_in);
    let mut x = start.clone();
    for t in 0..steps {
        x = step(&x)?;
        if t >= burn_in {
            summary.push(&x);
        }
    }
    Ok(summary.finish())
}

/// `steps` Pólya-Gamma Gibbs sweeps from `start`; the first `burn_in` draws
/// are discarded.
pub fn run_single_chain_gibbs(
    post: &LogitPosterior,
    steps: usize,
    burn_in: usize,
    start: &DVector<f64>,
    master_seed: u64,
) -> Result<ChainRunResult> {
    check_run(post, steps, burn_in, start)?;
    let mut stream = derive_stream(master_seed, GIBBS_LABEL, 0);
    let (means, stderrs) = drive(steps, burn_in, start, |x| pg_gibbs_step(&mut stream, x, post))?;
    Ok(ChainRunResult {
        means,
        stderrs,
        n_steps: steps,
        burn_in,
        acceptance_rate: None,
    })
}

/// Shape of the random-walk increment covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RwmCovariance {
    /// `(1/2+h) Σ`, the importance-proposal covariance.
    Proposal,
    /// Inverse Hessian of the negative log posterior at the mode.
    #[default]
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RwmSettings {
    pub covariance: RwmCovariance,
    /// Replaces the `2.38/√d` factor.
    pub scale_override: Option<f64>,
}

impl Default for RwmSettings {
    fn default() -> Self {
        RwmSettings {
            covariance: RwmCovariance::Laplace,
            scale_override: None,
        }
    }
}

/// Gaussian random-walk Metropolis kernel `β' = β + s L z`.
#[derive(Clone, Debug)]
pub struct RwmKernel<'a> {
    post: &'a LogitPosterior,
    step_factor: DMatrix<f64>,
}

impl<'a> RwmKernel<'a> {
    pub fn new(post: &'a LogitPosterior, settings: RwmSettings) -> Result<Self> {
        let d = post.d();
        let scale = settings.scale_override.unwrap_or(OPTIMAL_SCALE / (d as f64).sqrt());
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(MscError::invalid(format!("RWM scale must be finite and >= 0, got {scale}")));
        }
        let factor = match settings.covariance {
            RwmCovariance::Proposal => post.sigma_chol() * (0.5 + post.h()).sqrt(),
            RwmCovariance::Laplace => {
                let hess = post.objective_hessian(post.beta_star()?);
                let cov = linalg::cholesky(&hess, "posterior Hessian at the mode")?.inverse();
                let cov = (&cov + cov.transpose()) * 0.5;
                linalg::cholesky(&cov, "Laplace covariance")?.unpack()
            }
        };
        Ok(RwmKernel {
            post,
            step_factor: factor * scale,
        })
    }

    /// One Metropolis step, given the current log target. Returns the new
    /// state, its log target and whether the move was accepted.
    pub fn step(&self, stream: &mut RngStream, x: &DVector<f64>, log_target: f64) -> (DVector<f64>, f64, bool) {
        let z = std_normal_vector(stream, x.len());
        let candidate = x + &self.step_factor * z;
        let lp = self.post.log_unnorm_posterior(&candidate);
        let u = stream.uniform_pos();
        if u.ln() <= lp - log_target {
            (candidate, lp, true)
        } else {
            (x.clone(), log_target, false)
        }
    }
}

/// Random-walk Metropolis with the default [`RwmSettings`].
pub fn run_rwm(
    post: &LogitPosterior,
    steps: usize,
    burn_in: usize,
    start: &DVector<f64>,
    master_seed: u64,
) -> Result<ChainRunResult> {
    run_rwm_with(post, steps, burn_in, start, master_seed, RwmSettings::default())
}

pub fn run_rwm_with(
    post: &LogitPosterior,
    steps: usize,
    burn_in: usize,
    start: &DVector<f64>,
    master_seed: u64,
    settings: RwmSettings,
) -> Result<ChainRunResult> {
    check_run(post, steps, burn_in, start)?;
    let kernel = RwmKernel::new(post, settings)?;
    let mut stream = derive_stream(master_seed, RWM_LABEL, 0);
    let mut log_target = post.log_unnorm_posterior(start);
    if !log_target.is_finite() {
        return Err(MscError::invalid("posterior density vanishes at the RWM start"));
    }
    let mut accepted = 0usize;
    let (means, stderrs) = drive(steps, burn_in, start, |x| {
        let (next, lp, acc) = kernel.step(&mut stream, x, log_target);
        log_target = lp;
        accepted += acc as usize;
        Ok(next)
    })?;
    Ok(ChainRunResult {
        means,
        stderrs,
        n_steps: steps,
        burn_in,
        acceptance_rate: Some(accepted as f64 / steps as f64),
    })
}
