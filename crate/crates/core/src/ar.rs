//! Gaussian AR(1) chain `X_t = ρ X_{t-1} + √(1-ρ²) ξ_t` on `R^d`.
//!
//! The invariant law is `Γ = N(0, I_d)`. Atoms come from the proposal
//! `Γ_h = N(0, (1/2 + h) I_d)`, the drift function is `V(x) = 1 + ||x||²`
//! and `C_r = {||x||² <= r d}`.

use crate::bounds::{self, ArConstants};
use crate::engine::{DriftSpec, ModelBundle, Observable};
use crate::error::{MscError, Result};
use crate::rng::RngStream;
use crate::sampling::sample_std_normal;

pub type ArState = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArConfig {
    pub rho: f64,
    pub d: usize,
    pub h: f64,
    pub r: f64,
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(MscError::invalid(format!("rho = {} not in (0, 1)", self.rho)));
        }
        if self.d == 0 {
            return Err(MscError::invalid("d must be at least 1"));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(MscError::invalid(format!("h = {} must be positive", self.h)));
        }
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(MscError::invalid(format!("r = {} must exceed 1", self.r)));
        }
        Ok(())
    }
}

impl Default for ArConfig {
    fn default() -> Self {
        ArConfig {
            rho: 0.9,
            d: 2,
            h: 0.49,
            r: 1.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ArModel {
    config: ArConfig,
    constants: ArConstants,
    drift: DriftSpec,
    innovation_sd: f64,
    proposal_sd: f64,
    log_weight_offset: f64,
    log_weight_slope: f64,
}

impl ArModel {
    pub fn new(config: ArConfig) -> Result<Self> {
        config.validate()?;
        let constants = bounds::ar_constants(config.rho, config.d, config.h, config.r)?;
        let drift = constants.drift()?;
        let proposal_var = 0.5 + config.h;
        Ok(ArModel {
            config,
            constants,
            drift,
            innovation_sd: (1.0 - config.rho * config.rho).sqrt(),
            proposal_sd: proposal_var.sqrt(),
            log_weight_offset: 0.5 * config.d as f64 * proposal_var.ln(),
            log_weight_slope: 0.5 * (1.0 - 1.0 / proposal_var),
        })
    }

    pub fn config(&self) -> &ArConfig {
        &self.config
    }

    pub fn constants(&self) -> &ArConstants {
        &self.constants
    }

    /// Exact draw from the invariant law `N(0, I_d)`.
    pub fn sample_invariant(&self, stream: &mut RngStream) -> ArState {
        (0..self.config.d).map(|_| sample_std_normal(stream)).collect()
    }
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// One AR(1) transition.
pub fn ar_kernel_step(stream: &mut RngStream, x: &[f64], config: &ArConfig) -> ArState {
    let s = (1.0 - config.rho * config.rho).sqrt();
    x.iter().map(|&xi| config.rho * xi + s * sample_std_normal(stream)).collect()
}

/// Exact `log(dΓ/dΓ_h)(x)` with both normalizing constants:
/// `(d/2) log(1/2+h) - ||x||² (1 - 1/(1/2+h)) / 2`.
pub fn ar_log_weight(x: &[f64], config: &ArConfig) -> f64 {
    let v = 0.5 + config.h;
    0.5 * config.d as f64 * v.ln() - 0.5 * (1.0 - 1.0 / v) * norm_sq(x)
}

/// `||x||² <= r d`.
pub fn ar_in_c(x: &[f64], config: &ArConfig) -> bool {
    norm_sq(x) <= config.r * config.d as f64
}

impl ModelBundle for ArModel {
    type State = ArState;

    fn propose(&self, stream: &mut RngStream) -> Result<ArState> {
        Ok((0..self.config.d).map(|_| self.proposal_sd * sample_std_normal(stream)).collect())
    }

    fn log_weight(&self, x: &ArState) -> f64 {
        self.log_weight_offset - self.log_weight_slope * norm_sq(x)
    }

    fn kernel_step(&self, stream: &mut RngStream, x: &ArState) -> Result<ArState> {
        Ok(x
            .iter()
            .map(|&xi| self.config.rho * xi + self.innovation_sd * sample_std_normal(stream))
            .collect())
    }

    fn f_value(&self, x: &ArState) -> f64 {
        1.0 + norm_sq(x)
    }

    fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    fn in_c(&self, x: &ArState) -> bool {
        ar_in_c(x, &self.config)
    }
}

/// `φ(x) = x_k` (0-based `k`).
pub fn coordinate(k: usize) -> Observable<ArState> {
    Observable::new(format!("x{}", k + 1), move |x: &ArState| x[k])
}

/// `φ(x) = 1{||x||² <= t}`.
pub fn ball_indicator(t: f64) -> Observable<ArState> {
    Observable::new(format!("ball_{t}"), move |x: &ArState| if norm_sq(x) <= t { 1.0 } else { 0.0 })
}

/// `φ = f = 1 + ||x||²`.
pub fn drift_function() -> Observable<ArState> {
    Observable::new("f", |x: &ArState| 1.0 + norm_sq(x))
}
