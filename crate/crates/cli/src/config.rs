//! Run configuration: one TOML file per experiment.
//!
//! ```toml
//! seed = 2024            # master seed
//! output_dir = "out"
//! workers = 4            # optional; default is hardware parallelism
//! cap = 1000000          # excursion step cap
//!
//! [plan]                 # plan
//! eps = 0.1
//! delta = 0.1
//! rho = 0.9
//! h = 0.49
//! r = 1.5
//! d_min = 1
//! d_max = 30
//!
//! [ar]                   # run-ar
//! rho = 0.9
//! d = 2
//! h = 0.49
//! r = 1.5
//! n = 100000
//! m = 10000
//!
//! [logit]                # run-logit, baseline-*
//! data_path = "data/processed.cleveland.data"
//! sigma_scale = 10.0
//! h = 0.49
//! r = 1.001
//! standardize = false
//! n = 100000
//! m = 10000
//! proposal = "prior"     # or "laplace"
//! laplace_inflation = 1.2
//!
//! [baseline]             # baseline-gibbs, baseline-rwm
//! steps = 100000
//! burn_in = 10000        # optional; default 10% of steps
//! start = "atoms"        # or "mode"
//! rwm_covariance = "laplace"   # or "proposal"
//! rwm_scale_override = 0.5     # optional
//!
//! [selftest]             # pg-selftest
//! draws = 1000000
//! b = [0.0, 0.5, 1.0, 3.0]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar: Option<ArSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit: Option<LogitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selftest: Option<SelftestSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("msc-out")
}

fn default_cap() -> u64 {
    msc_core::engine::DEFAULT_CAP
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub eps: f64,
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_ar_h")]
    pub h: f64,
    #[serde(default = "default_ar_r")]
    pub r: f64,
    #[serde(default = "one")]
    pub d_min: usize,
    #[serde(default = "thirty")]
    pub d_max: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArSection {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "two")]
    pub d: usize,
    #[serde(default = "default_ar_h")]
    pub h: f64,
    #[serde(default = "default_ar_r")]
    pub r: f64,
    pub n: usize,
    pub m: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalChoice {
    /// `N(β*, (1/2+h) Σ)`.
    Prior,
    /// `N(β*, s² H(β*)⁻¹)`.
    Laplace,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitSection {
    pub data_path: PathBuf,
    #[serde(default = "ten")]
    pub sigma_scale: f64,
    #[serde(default = "default_ar_h")]
    pub h: f64,
    #[serde(default = "default_logit_r")]
    pub r: f64,
    #[serde(default)]
    pub standardize: bool,
    pub n: usize,
    pub m: usize,
    #[serde(default = "default_proposal")]
    pub proposal: ProposalChoice,
    #[serde(default = "default_inflation")]
    pub laplace_inflation: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartChoice {
    /// One draw from the weighted atoms of the MSC run.
    Atoms,
    /// The posterior mode.
    Mode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RwmCovarianceChoice {
    Laplace,
    Proposal,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default = "default_start")]
    pub start: StartChoice,
    #[serde(default = "default_rwm_covariance")]
    pub rwm_covariance: RwmCovarianceChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rwm_scale_override: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelftestSection {
    #[serde(default = "million")]
    pub draws: usize,
    #[serde(default = "default_selftest_b")]
    pub b: Vec<f64>,
}

impl Default for SelftestSection {
    fn default() -> Self {
        SelftestSection {
            draws: million(),
            b: default_selftest_b(),
        }
    }
}

fn default_rho() -> f64 {
    0.9
}
fn default_ar_h() -> f64 {
    0.49
}
fn default_ar_r() -> f64 {
    1.5
}
fn default_logit_r() -> f64 {
    1.001
}
fn default_proposal() -> ProposalChoice {
    ProposalChoice::Prior
}
fn default_inflation() -> f64 {
    1.2
}
fn default_start() -> StartChoice {
    StartChoice::Atoms
}
fn default_rwm_covariance() -> RwmCovarianceChoice {
    RwmCovarianceChoice::Laplace
}
fn default_selftest_b() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 3.0]
}
fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn thirty() -> usize {
    30
}
fn ten() -> f64 {
    10.0
}
fn million() -> usize {
    1_000_000
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    check(v > 0.0 && v.is_finite(), || format!("{name} must be positive and finite, got {v}"))
}

fn open_unit(name: &str, v: f64) -> Result<(), CliError> {
    check(v > 0.0 && v < 1.0, || format!("{name} must lie in (0, 1), got {v}"))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        if let Some(l) = cfg.logit.as_mut() {
            l.data_path = resolve(base, &l.data_path);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        check(self.cap >= 1, || "cap must be at least 1".into())?;
        check(self.workers != Some(0), || "workers must be at least 1".into())?;
        if let Some(p) = &self.plan {
            open_unit("plan.eps", p.eps)?;
            open_unit("plan.delta", p.delta)?;
            open_unit("plan.rho", p.rho)?;
            positive("plan.h", p.h)?;
            check(p.r > 1.0, || format!("plan.r must exceed 1, got {}", p.r))?;
            check(p.d_min >= 1 && p.d_min <= p.d_max, || "need 1 <= plan.d_min <= plan.d_max".into())?;
        }
        if let Some(a) = &self.ar {
            open_unit("ar.rho", a.rho)?;
            positive("ar.h", a.h)?;
            check(a.d >= 1, || "ar.d must be at least 1".into())?;
            check(a.r > 1.0, || format!("ar.r must exceed 1, got {}", a.r))?;
            check(a.n >= 1, || "ar.n must be at least 1".into())?;
            check(a.m >= 2, || "ar.m must be at least 2".into())?;
        }
        if let Some(l) = &self.logit {
            positive("logit.sigma_scale", l.sigma_scale)?;
            check(l.h > 0.0 && l.h <= 0.5, || format!("logit.h must lie in (0, 1/2], got {}", l.h))?;
            check(l.r > 1.0, || format!("logit.r must exceed 1, got {}", l.r))?;
            check(l.n >= 1, || "logit.n must be at least 1".into())?;
            check(l.m >= 2, || "logit.m must be at least 2".into())?;
            positive("logit.laplace_inflation", l.laplace_inflation)?;
        }
        if let Some(b) = &self.baseline {
            let burn = b.burn_in.unwrap_or(0);
            check(b.steps > burn, || format!("baseline.steps ({}) must exceed burn_in ({burn})", b.steps))?;
            if let Some(s) = b.rwm_scale_override {
                check(s >= 0.0 && s.is_finite(), || format!("rwm_scale_override must be >= 0, got {s}"))?;
            }
        }
        if let Some(s) = &self.selftest {
            check(s.draws >= 2, || "selftest.draws must be at least 2".into())?;
            check(!s.b.is_empty() && s.b.iter().all(|b| *b >= 0.0 && b.is_finite()), || {
                "selftest.b must be a non-empty list of finite values >= 0".into()
            })?;
        }
        Ok(())
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
