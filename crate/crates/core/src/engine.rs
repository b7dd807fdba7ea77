//! The many-short-chains (MSC) estimator.
//!
//! 1. Draw `N` proposal atoms `Y_i ~ Q` and self-normalize their importance
//!    weights into the random initial distribution `Π^N_Y`.
//! 2. For `m = 1..M`, draw `X_0 ~ Π^N_Y` and run the chain until it first
//!    returns to `C = {f <= R}`, accumulating `φ(X_1) + ... + φ(X_τ)`.
//!    Chains that start outside `C` contribute zero.
//! 3. Average the `M` excursion sums.
//!
//! Every atom and chain draws from its own stream (`"init"`/`"chain"` with
//! the atom or chain index), and reductions run sequentially in index
//! order, so results are bit-identical for any worker count.

use log::debug;
use rayon::prelude::*;

use crate::error::{MscError, Result};
use crate::rng::{derive_stream, RngStream};
use crate::sampling::AliasTable;
use crate::stats;

pub const INIT_LABEL: &str = "init";
pub const CHAIN_LABEL: &str = "chain";
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Constants of the drift condition `PV <= V - (1-γ) f + K` and the level
/// `R` defining `C = {x : f(x) <= R}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftSpec {
    pub gamma: f64,
    pub k: f64,
    pub r: f64,
    /// `true` when `f = V`.
    pub geometric: bool,
}

impl DriftSpec {
    pub fn new(gamma: f64, k: f64, r: f64, geometric: bool) -> Result<Self> {
        let spec = DriftSpec { gamma, k, r, geometric };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        // gamma = 0 is admitted: a bound PV <= K is the limiting case used by
        // the Pólya-Gamma drift.
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(MscError::InvalidDrift(format!("gamma = {} not in [0, 1)", self.gamma)));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(MscError::InvalidDrift(format!("K = {} must be positive", self.k)));
        }
        let floor = self.k / (1.0 - self.gamma);
        if !(self.r > floor) || !self.r.is_finite() {
            return Err(MscError::InvalidDrift(format!(
                "R = {} must exceed K/(1-gamma) = {floor}",
                self.r
            )));
        }
        Ok(())
    }

    /// `γ + K/R`, the effective contraction rate outside `C`.
    pub fn gamma_r(&self) -> f64 {
        self.gamma + self.k / self.r
    }
}

/// A target plus everything the MSC estimator needs to simulate it.
pub trait ModelBundle: Sync {
    type State: Clone + Send + Sync;

    /// One draw from the importance proposal `Q`.
    fn propose(&self, stream: &mut RngStream) -> Result<Self::State>;

    /// `log(dΠ/dQ)` up to an additive constant. `-inf` marks zero weight.
    fn log_weight(&self, x: &Self::State) -> f64;

    /// One transition of the Π-invariant Markov kernel.
    fn kernel_step(&self, stream: &mut RngStream, x: &Self::State) -> Result<Self::State>;

    /// The drift function `f >= 1`.
    fn f_value(&self, x: &Self::State) -> f64;

    fn drift(&self) -> &DriftSpec;

    fn in_c(&self, x: &Self::State) -> bool {
        self.f_value(x) <= self.drift().r
    }
}

/// A named real-valued function of the state.
pub struct Observable<S> {
    pub name: String,
    func: Box<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Observable<S> {
    pub fn new(name: impl Into<String>, func: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            name: name.into(),
            func: Box::new(func),
        }
    }

    #[inline]
    pub fn eval(&self, x: &S) -> f64 {
        (self.func)(x)
    }
}

impl<S> std::fmt::Debug for Observable<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable").field("name", &self.name).finish()
    }
}

/// The random initial distribution `Π^N_Y`.
#[derive(Clone, Debug)]
pub struct WeightedAtoms<S> {
    pub atoms: Vec<S>,
    pub norm_weights: Vec<f64>,
    /// `(Σw)² / Σw²`.
    pub ess: f64,
    /// Estimate of `∫ w dΠ`, equal to `N / ess`.
    pub w2_hat: f64,
}

impl<S> WeightedAtoms<S> {
    pub fn n(&self) -> usize {
        self.atoms.len()
    }
}

/// Execution settings. Results never depend on `workers`.
#[derive(Clone, Copy, Debug)]
pub struct EngineConfig {
    pub workers: usize,
    pub cap: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cap: DEFAULT_CAP,
        }
    }
}

impl EngineConfig {
    pub fn with_workers(workers: usize) -> Self {
        EngineConfig {
            workers,
            ..Default::default()
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| MscError::invalid(format!("cannot start worker pool: {e}")))
    }
}

/// Run `job(i)` for `i in 0..n` on the pool and return the results in index
/// order. On failure the error of the lowest failing index is returned.
fn ordered_map<T, F>(cfg: &EngineConfig, n: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = cfg.pool()?;
    let results: Vec<Result<T>> = pool.install(|| (0..n).into_par_iter().map(&job).collect());
    results.into_iter().collect()
}

/// `N Σ w² / (Σ w)²` for nonnegative (possibly unnormalized) weights.
///
/// Estimates `∫ w dΠ = E_Q[w²]` and is invariant to rescaling the weights,
/// so an unknown normalizing constant cancels.
pub fn estimate_weight_second_moment(weights: &[f64]) -> Result<f64> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(MscError::ZeroTotalWeight);
    }
    let (sum, sum_sq) = weights
        .iter()
        .map(|w| w / max)
        .fold((0.0, 0.0), |(s, q), w| (s + w, q + w * w));
    Ok(weights.len() as f64 * sum_sq / (sum * sum))
}

/// Max-shift exponentiation and normalization of log-weights.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let shifted = shifted_weights(log_weights)?;
    let total: f64 = shifted.iter().sum();
    Ok(shifted.into_iter().map(|w| w / total).collect())
}

/// `exp(lw - max lw)`: unnormalized weights with the largest equal to one.
fn shifted_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let mut max = f64::NEG_INFINITY;
    for (index, &lw) in log_weights.iter().enumerate() {
        if lw.is_nan() || lw == f64::INFINITY {
            return Err(MscError::NonFiniteWeight { index, value: lw });
        }
        max = max.max(lw);
    }
    if max == f64::NEG_INFINITY {
        return Err(MscError::ZeroTotalWeight);
    }
    Ok(log_weights.iter().map(|lw| (lw - max).exp()).collect())
}

/// Draw `N` atoms from the proposal (atom `i` uses stream `("init", i)`)
/// and self-normalize their weights.
pub fn build_initial_distribution<M: ModelBundle>(
    model: &M,
    n: usize,
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<WeightedAtoms<M::State>> {
    if n == 0 {
        return Err(MscError::invalid("N must be at least 1"));
    }
    let drawn = ordered_map(cfg, n, |i| {
        let mut stream = derive_stream(master_seed, INIT_LABEL, i as u64);
        let x = model.propose(&mut stream)?;
        let lw = model.log_weight(&x);
        Ok((x, lw))
    })?;
    let (atoms, log_weights): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    let shifted = shifted_weights(&log_weights)?;
    let w2_hat = estimate_weight_second_moment(&shifted)?;
    let total: f64 = shifted.iter().sum();
    let norm_weights = shifted.into_iter().map(|w| w / total).collect();
    let ess = n as f64 / w2_hat;
    debug!("built {n} atoms: ess = {ess:.3}, w2_hat = {w2_hat:.6}");
    Ok(WeightedAtoms {
        atoms,
        norm_weights,
        ess,
        w2_hat,
    })
}

/// One chain's summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Excursion {
    pub started_in_c: bool,
    /// First return time to `C`; zero when the chain started outside `C`.
    pub tau: u64,
    /// `Σ_{k=1..τ} φ_j(X_k)` per observable.
    pub sums: Vec<f64>,
}

impl Excursion {
    fn skipped(n_functions: usize) -> Self {
        Excursion {
            started_in_c: false,
            tau: 0,
            sums: vec![0.0; n_functions],
        }
    }
}

/// Run one chain from `start` until its first return to `C`.
///
/// The sums include the returning state `X_τ` and exclude `X_0`. Fails with
/// [`MscError::CapExceeded`] (carrying the stream index as chain id) when
/// no return happens within `cap` steps.
pub fn run_excursion<M: ModelBundle>(
    model: &M,
    start: &M::State,
    stream: &mut RngStream,
    cap: u64,
    functions: &[Observable<M::State>],
) -> Result<Excursion> {
    if cap == 0 {
        return Err(MscError::invalid("excursion cap must be at least 1"));
    }
    if !model.in_c(start) {
        return Ok(Excursion::skipped(functions.len()));
    }
    let mut sums = vec![0.0; functions.len()];
    let mut x = model.kernel_step(stream, start)?;
    for tau in 1..=cap {
        for (s, phi) in sums.iter_mut().zip(functions) {
            *s += phi.eval(&x);
        }
        if model.in_c(&x) {
            return Ok(Excursion {
                started_in_c: true,
                tau,
                sums,
            });
        }
        if tau < cap {
            x = model.kernel_step(stream, &x)?;
        }
    }
    Err(MscError::CapExceeded {
        chain: stream.index() as usize,
        cap,
    })
}

#[derive(Clone, Debug)]
pub struct MscResult {
    pub function_names: Vec<String>,
    pub estimates: Vec<f64>,
    /// Sample standard deviation of the excursion sums over `√M`,
    /// conditional on the atoms.
    pub stderrs: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub mean_tau: f64,
    pub p95_tau: f64,
    /// Share of chains whose start fell outside `C`.
    pub skip_fraction: f64,
    pub ess: f64,
    pub w2_hat: f64,
    /// Return time of every chain, in chain order.
    pub taus: Vec<u64>,
}

/// Run `M` excursions from `Π^N_Y` and average them.
///
/// Chain `m` (0-based) uses stream `("chain", m)` both to pick its start
/// atom and to drive its path.
pub fn msc_estimate<M: ModelBundle>(
    model: &M,
    atoms: &WeightedAtoms<M::State>,
    m: usize,
    functions: &[Observable<M::State>],
    master_seed: u64,
    cfg: &EngineConfig,
) -> Result<MscResult> {
    if m < 2 {
        return Err(MscError::invalid(format!("M must be at least 2, got {m}")));
    }
    let table = AliasTable::new(&atoms.norm_weights)?;
    let excursions = ordered_map(cfg, m, |chain| {
        let mut stream = derive_stream(master_seed, CHAIN_LABEL, chain as u64);
        let start = &atoms.atoms[table.sample(&mut stream)];
        run_excursion(model, start, &mut stream, cfg.cap, functions)
    })?;
    Ok(summarize(functions, &excursions, atoms))
}

fn summarize<S>(functions: &[Observable<S>], excursions: &[Excursion], atoms: &WeightedAtoms<S>) -> MscResult {
    let m = excursions.len();
    let mut estimates = Vec::with_capacity(functions.len());
    let mut stderrs = Vec::with_capacity(functions.len());
    let mut column = vec![0.0; m];
    for j in 0..functions.len() {
        for (c, e) in column.iter_mut().zip(excursions) {
            *c = e.sums[j];
        }
        let (mean, sd) = stats::mean_and_sd(&column);
        estimates.push(mean);
        stderrs.push(sd / (m as f64).sqrt());
    }
    let taus: Vec<u64> = excursions.iter().map(|e| e.tau).collect();
    let tau_f: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
    let skipped = excursions.iter().filter(|e| !e.started_in_c).count();
    MscResult {
        function_names: functions.iter().map(|f| f.name.clone()).collect(),
        estimates,
        stderrs,
        m,
        n: atoms.n(),
        mean_tau: tau_f.iter().sum::<f64>() / m as f64,
        p95_tau: stats::quantile(&tau_f, 0.95),
        skip_fraction: skipped as f64 / m as f64,
        ess: atoms.ess,
        w2_hat: atoms.w2_hat,
        taus,
    }
}
