//! Bayesian logistic regression with a Gaussian prior, sampled by the
//! Pólya-Gamma data-augmentation Gibbs sampler.

mod data;

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use log::debug;
use nalgebra::{DMatrix, DVector};

pub use data::{
    heart_column_names, load_heart_dataset, standardize, Dataset, HeartData, HeartOptions, Standardization,
    REFERENCE_COVARIATES,
};

use crate::bounds::{self, PgConstants};
use crate::engine::{DriftSpec, ModelBundle, Observable};
use crate::error::{MscError, Result};
use crate::linalg;
use crate::polya_gamma::sample_polya_gamma;
use crate::rng::RngStream;
use crate::sampling::std_normal_vector;

pub type LogitState = DVector<f64>;

pub const MAP_TOL: f64 = 1e-8;
pub const MAP_MAX_ITER: usize = 100;

/// `log(1 + e^t)` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ℓ(β) = Σ_i softplus(x_iᵀβ) - y_i x_iᵀβ`.
pub fn neg_log_lik(beta: &DVector<f64>, data: &Dataset) -> f64 {
    let eta = &data.x * beta;
    eta.iter().zip(data.y.iter()).map(|(&t, &y)| softplus(t) - y * t).sum()
}

/// `∇ℓ(β) = Xᵀ(σ(Xβ) - Y)`.
pub fn neg_log_lik_grad(beta: &DVector<f64>, data: &Dataset) -> DVector<f64> {
    let resid = (&data.x * beta).zip_map(&data.y, |t, y| sigmoid(t) - y);
    data.x.tr_mul(&resid)
}

fn hessian_weights(beta: &DVector<f64>, data: &Dataset) -> DVector<f64> {
    (&data.x * beta).map(|t| {
        let s = sigmoid(t);
        s * (1.0 - s)
    })
}

/// `∇²ℓ(β) = XᵀDX` with `D = diag(σ(1-σ))`.
pub fn neg_log_lik_hessian(beta: &DVector<f64>, data: &Dataset) -> DMatrix<f64> {
    let w = hessian_weights(beta, data);
    let mut xw = data.x.clone();
    for (mut row, wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi.sqrt();
    }
    xw.tr_mul(&xw)
}

/// `∇²ℓ(β) v` without forming the Hessian.
pub fn neg_log_lik_hvp(beta: &DVector<f64>, v: &DVector<f64>, data: &Dataset) -> DVector<f64> {
    let w = hessian_weights(beta, data);
    let xv = (&data.x * v).component_mul(&w);
    data.x.tr_mul(&xv)
}

/// Posterior `π(β) ∝ exp(-ℓ(β) - βᵀΣ⁻¹β/2)` together with the proposal
/// scale `h`. Immutable once built and shared across workers.
#[derive(Debug)]
pub struct LogitPosterior {
    data: Dataset,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    sigma_chol: DMatrix<f64>,
    h: f64,
    score: DVector<f64>,
    l: f64,
    beta_star: OnceLock<DVector<f64>>,
}

impl LogitPosterior {
    pub fn new(data: Dataset, sigma: DMatrix<f64>, h: f64) -> Result<Self> {
        let d = data.d();
        if sigma.shape() != (d, d) {
            return Err(MscError::invalid(format!("Sigma must be {d}x{d}, got {:?}", sigma.shape())));
        }
        if !linalg::is_symmetric(&sigma, 1e-12) {
            return Err(MscError::Factorization("Sigma is not symmetric".into()));
        }
        if !(h > 0.0 && h <= 0.5) {
            return Err(MscError::invalid(format!("h must lie in (0, 1/2], got {h}")));
        }
        let chol = linalg::cholesky(&sigma, "Sigma")?;
        let sigma_inv = chol.inverse();
        let sigma_chol = chol.unpack();
        let score = data.x.tr_mul(&data.y.map(|v| v - 0.5));
        let sigma_norm = linalg::largest_eigenvalue_psd(&sigma, linalg::POWER_ITERATION_TOL)?;
        let l = sigma_norm * sigma_norm * score.norm_squared();
        Ok(LogitPosterior {
            data,
            sigma,
            sigma_inv,
            sigma_chol,
            h,
            score,
            l,
            beta_star: OnceLock::new(),
        })
    }

    /// Prior `Σ = scale · I`.
    pub fn with_isotropic_prior(data: Dataset, scale: f64, h: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(MscError::invalid(format!("prior scale must be positive, got {scale}")));
        }
        let d = data.d();
        Self::new(data, DMatrix::identity(d, d) * scale, h)
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// Lower Cholesky factor of `Σ`.
    pub fn sigma_chol(&self) -> &DMatrix<f64> {
        &self.sigma_chol
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `Xᵀ(Y - ½)`.
    pub fn score(&self) -> &DVector<f64> {
        &self.score
    }

    /// `L = ||Σ||₂² ||Xᵀ(Y - ½)||₂²`.
    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn log_unnorm_posterior(&self, beta: &DVector<f64>) -> f64 {
        -neg_log_lik(beta, &self.data) - 0.5 * beta.dot(&(&self.sigma_inv * beta))
    }

    /// Gradient of the negative log posterior.
    pub fn objective_grad(&self, beta: &DVector<f64>) -> DVector<f64> {
        neg_log_lik_grad(beta, &self.data) + &self.sigma_inv * beta
    }

    /// The posterior mode, found on first use with tolerance [`MAP_TOL`].
    pub fn beta_star(&self) -> Result<&DVector<f64>> {
        if let Some(b) = self.beta_star.get() {
            return Ok(b);
        }
        let b = map_estimate(self, MAP_TOL)?;
        Ok(self.beta_star.get_or_init(|| b))
    }

    /// The importance proposal `N(β*, (1/2+h) Σ)`.
    pub fn proposal(&self) -> Result<GaussianProposal> {
        let mean = self.beta_star()?.clone();
        let chol = &self.sigma_chol * (0.5 + self.h).sqrt();
        GaussianProposal::new(mean, chol)
    }

    /// `N(β*, s² H⁻¹)` with `H` the Hessian of the negative log posterior at
    /// the mode and `s = inflation`.
    pub fn laplace_proposal(&self, inflation: f64) -> Result<GaussianProposal> {
        if !(inflation > 0.0 && inflation.is_finite()) {
            return Err(MscError::invalid(format!("inflation must be positive, got {inflation}")));
        }
        let mean = self.beta_star()?.clone();
        let cov = linalg::cholesky(&self.objective_hessian(&mean), "posterior Hessian at the mode")?.inverse();
        let cov = (&cov + cov.transpose()) * 0.5;
        let chol = linalg::cholesky(&cov, "Laplace covariance")?.unpack() * inflation;
        GaussianProposal::new(mean, chol)
    }

    /// Hessian of the negative log posterior.
    pub fn objective_hessian(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        neg_log_lik_hessian(beta, &self.data) + &self.sigma_inv
    }
}

/// Newton's method on `ℓ(β) + βᵀΣ⁻¹β/2` from `β = 0`, with backtracking,
/// until `||∇|| <= tol`.
pub fn map_estimate(post: &LogitPosterior, tol: f64) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(MscError::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let objective = |b: &DVector<f64>| -post.log_unnorm_posterior(b);
    let mut beta = DVector::zeros(post.d());
    let mut value = objective(&beta);
    for iter in 0..MAP_MAX_ITER {
        let grad = post.objective_grad(&beta);
        let gnorm = grad.norm();
        if gnorm <= tol {
            debug!("MAP converged after {iter} Newton steps, |grad| = {gnorm:.3e}");
            return Ok(beta);
        }
        let chol = linalg::cholesky(&post.objective_hessian(&beta), "posterior Hessian")?;
        let step = chol.solve(&grad);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &beta - &step * t;
            let v = objective(&candidate);
            // Near the mode the objective stops resolving the decrease, so a
            // step that shrinks the gradient is accepted too.
            let accept = v <= value - 1e-4 * t * slope
                || post.objective_grad(&candidate).norm() < gnorm
                || t < 1e-10;
            if accept {
                beta = candidate;
                value = v;
                break;
            }
            t *= 0.5;
        }
    }
    let gnorm = post.objective_grad(&beta).norm();
    if gnorm <= tol {
        return Ok(beta);
    }
    Err(MscError::IterationCap {
        what: "MAP Newton iteration",
        cap: MAP_MAX_ITER,
    })
}

/// `N(mean, LLᵀ)` with a lower-triangular `L`.
#[derive(Clone, Debug)]
pub struct GaussianProposal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianProposal {
    pub fn new(mean: DVector<f64>, chol: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if chol.shape() != (d, d) {
            return Err(MscError::invalid("proposal factor has the wrong shape"));
        }
        let diag = chol.diagonal();
        if diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(MscError::Factorization("proposal covariance is not positive definite".into()));
        }
        let log_norm = -diag.iter().map(|v| v.ln()).sum::<f64>() - 0.5 * d as f64 * (2.0 * PI).ln();
        Ok(GaussianProposal {
            mean,
            chol: chol.lower_triangle(),
            log_norm,
        })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sample(&self, stream: &mut RngStream) -> DVector<f64> {
        let z = std_normal_vector(stream, self.mean.len());
        &self.mean + &self.chol * z
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        match self.chol.solve_lower_triangular(&diff) {
            Some(u) => self.log_norm - 0.5 * u.norm_squared(),
            None => f64::NAN,
        }
    }
}

/// Pólya-Gamma latent variables of one Gibbs sweep.
#[derive(Clone, Debug)]
pub struct GibbsAux {
    pub omega: DVector<f64>,
}

/// One sweep of the two-block sampler: `ω_i ~ PG(1, |x_iᵀβ|)`, then
/// `β' ~ N(μ(ω), Σ(ω))` with `Σ(ω)⁻¹ = XᵀΩX + Σ⁻¹` and
/// `μ(ω) = Σ(ω) Xᵀ(Y - ½)`.
pub fn pg_gibbs_step(stream: &mut RngStream, beta: &DVector<f64>, post: &LogitPosterior) -> Result<DVector<f64>> {
    pg_gibbs_step_with_aux(stream, beta, post).map(|(b, _)| b)
}

pub fn pg_gibbs_step_with_aux(
    stream: &mut RngStream,
    beta: &DVector<f64>,
    post: &LogitPosterior,
) -> Result<(DVector<f64>, GibbsAux)> {
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(MscError::invalid("Gibbs step from a non-finite state"));
    }
    let x = &post.data.x;
    let eta = x * beta;
    let mut omega = DVector::zeros(eta.len());
    for (w, t) in omega.iter_mut().zip(eta.iter()) {
        *w = sample_polya_gamma(stream, t.abs())?;
    }
    let mut xw = x.clone();
    for (mut row, w) in xw.row_iter_mut().zip(omega.iter()) {
        row *= w.sqrt();
    }
    let precision = xw.tr_mul(&xw) + &post.sigma_inv;
    // One factorization P = LLᵀ serves both the mean solve and the draw
    // β' = μ + L⁻ᵀz, whose covariance is P⁻¹.
    let chol = linalg::cholesky(&precision, "Gibbs conditional precision")?;
    let mu = chol.solve(&post.score);
    let z = std_normal_vector(stream, beta.len());
    let noise = chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| MscError::Factorization("singular Gibbs precision factor".into()))?;
    Ok((mu + noise, GibbsAux { omega }))
}

/// `||β||² <= r L`.
pub fn logit_in_c(beta: &DVector<f64>, post: &LogitPosterior, r: f64) -> bool {
    beta.norm_squared() <= r * post.l()
}

/// MSC bundle: proposal `N(β*, (1/2+h)Σ)`, Pólya-Gamma Gibbs kernel, drift
/// `V(β) = 1 + ||β||²`.
#[derive(Debug)]
pub struct LogitModel {
    posterior: LogitPosterior,
    proposal: GaussianProposal,
    constants: PgConstants,
    drift: DriftSpec,
    r: f64,
}

impl LogitModel {
    pub fn new(posterior: LogitPosterior, r: f64) -> Result<Self> {
        let proposal = posterior.proposal()?;
        Self::with_proposal(posterior, r, proposal)
    }

    /// As [`LogitModel::new`] but with a caller-chosen importance proposal.
    pub fn with_proposal(posterior: LogitPosterior, r: f64, proposal: GaussianProposal) -> Result<Self> {
        if proposal.mean().len() != posterior.d() {
            return Err(MscError::invalid("proposal dimension does not match the posterior"));
        }
        let data = posterior.dataset();
        let constants = bounds::pg_constants(&data.x, &data.y, posterior.sigma(), posterior.h(), r)?;
        let drift = constants.drift()?;
        Ok(LogitModel {
            posterior,
            proposal,
            constants,
            drift,
            r,
        })
    }

    pub fn posterior(&self) -> &LogitPosterior {
        &self.posterior
    }

    pub fn into_posterior(self) -> LogitPosterior {
        self.posterior
    }

    pub fn proposal(&self) -> &GaussianProposal {
        &self.proposal
    }

    pub fn constants(&self) -> &PgConstants {
        &self.constants
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

impl ModelBundle for LogitModel {
    type State = LogitState;

    fn propose(&self, stream: &mut RngStream) -> Result<LogitState> {
        Ok(self.proposal.sample(stream))
    }

    fn log_weight(&self, x: &LogitState) -> f64 {
        self.posterior.log_unnorm_posterior(x) - self.proposal.log_density(x)
    }

    fn kernel_step(&self, stream: &mut RngStream, x: &LogitState) -> Result<LogitState> {
        pg_gibbs_step(stream, x, &self.posterior)
    }

    fn f_value(&self, x: &LogitState) -> f64 {
        1.0 + x.norm_squared()
    }

    fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    fn in_c(&self, x: &LogitState) -> bool {
        logit_in_c(x, &self.posterior, self.r)
    }
}

/// `β ↦ β_j`, named after the design column.
pub fn coefficient(j: usize, name: impl Into<String>) -> Observable<LogitState> {
    Observable::new(name, move |b: &LogitState| b[j])
}

/// One observable per coefficient.
pub fn coefficients(data: &Dataset) -> Vec<Observable<LogitState>> {
    data.column_names.iter().enumerate().map(|(j, n)| coefficient(j, n.clone())).collect()
}

/// `n log 2`, the negative log-likelihood at `β = 0`.
pub fn null_neg_log_lik(n: usize) -> f64 {
    n as f64 * LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use approx::assert_relative_eq;

    fn scalar(xs: &[f64], ys: &[f64]) -> Dataset {
        Dataset::new(
            DMatrix::from_column_slice(xs.len(), 1, xs),
            DVector::from_column_slice(ys),
            vec!["b".into()],
        )
        .unwrap()
    }

    fn synthetic(n: usize, d: usize, seed: u64) -> Dataset {
        let mut s = derive_stream(seed, "synthetic", 0);
        let x = DMatrix::from_fn(n, d, |_, j| if j == d - 1 { 1.0 } else { crate::sampling::sample_std_normal(&mut s) });
        let truth: Vec<f64> = (0..d).map(|j| 0.8 - 0.5 * j as f64).collect();
        let y = DVector::from_fn(n, |i, _| {
            let t: f64 = (0..d).map(|j| x[(i, j)] * truth[j]).sum();
            if s.uniform() < sigmoid(t) { 1.0 } else { 0.0 }
        });
        Dataset::new(x, y, (0..d).map(|j| format!("b{j}")).collect()).unwrap()
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert_relative_eq!(softplus(0.0), LN_2);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_relative_eq!(sigmoid(0.3) + sigmoid(-0.3), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn neg_log_lik_examples() {
        let ds = synthetic(7, 3, 1);
        assert_relative_eq!(neg_log_lik(&DVector::zeros(3), &ds), 7.0 * LN_2, epsilon = 1e-12);
        let one = scalar(&[1.0], &[1.0]);
        let v = neg_log_lik(&DVector::from_element(1, 2.0), &one);
        assert_relative_eq!(v, (1.0 + 2f64.exp()).ln() - 2.0, epsilon = 1e-14);
        assert!((v - 0.12693).abs() < 1e-5);
    }

    #[test]
    fn posterior_mirror_symmetry() {
        let ds = synthetic(15, 3, 2);
        let flipped = Dataset::new(ds.x.clone(), ds.y.map(|v| 1.0 - v), ds.column_names.clone()).unwrap();
        let p = LogitPosterior::with_isotropic_prior(ds, 10.0, 0.49).unwrap();
        let q = LogitPosterior::with_isotropic_prior(flipped, 10.0, 0.49).unwrap();
        let b = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        assert_relative_eq!(p.log_unnorm_posterior(&b), q.log_unnorm_posterior(&-&b), epsilon = 1e-12);
        assert_relative_eq!(
            p.log_unnorm_posterior(&DVector::zeros(3)),
            -null_neg_log_lik(15),
            epsilon = 1e-12
        );
    }

    #[test]
    fn map_scalar_examples() {
        let mirrored = scalar(&[1.0, 1.0], &[1.0, 0.0]);
        let p = LogitPosterior::with_isotropic_prior(mirrored, 10.0, 0.5).unwrap();
        assert!(p.beta_star().unwrap()[0].abs() < 1e-12);

        let one = scalar(&[1.0], &[1.0]);
        let p = LogitPosterior::with_isotropic_prior(one, 10.0, 0.5).unwrap();
        // Bisection on σ(β) - 1 + β/10.
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sigmoid(mid) - 1.0 + mid / 10.0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = p.beta_star().unwrap()[0];
        assert!((b - lo).abs() < 1e-8, "{b} vs {lo}");
        assert!((b - 1.633).abs() < 1e-3);
        assert!(p.objective_grad(p.beta_star().unwrap()).norm() <= MAP_TOL);
        assert!(map_estimate(&p, 0.0).is_err());
    }

    #[test]
    fn gaussian_log_density() {
        let chol = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.5, 1.0]);
        let g = GaussianProposal::new(DVector::from_vec(vec![1.0, -1.0]), chol.clone()).unwrap();
        let cov = &chol * chol.transpose();
        let x = DVector::from_vec(vec![0.2, 0.4]);
        let diff = &x - g.mean();
        let quad = diff.dot(&(cov.clone().try_inverse().unwrap() * &diff));
        let expect = -0.5 * quad - 0.5 * cov.determinant().ln() - (2.0 * PI).ln();
        assert_relative_eq!(g.log_density(&x), expect, epsilon = 1e-12);
    }

    #[test]
    fn gibbs_step_is_deterministic_and_omega_positive() {
        let ds = synthetic(20, 2, 3);
        let p = LogitPosterior::with_isotropic_prior(ds, 10.0, 0.49).unwrap();
        let b0 = DVector::from_vec(vec![0.5, -0.5]);
        let mut s1 = derive_stream(9, "chain", 4);
        let mut s2 = derive_stream(9, "chain", 4);
        let mut b = b0.clone();
        for _ in 0..200 {
            let (next, aux) = pg_gibbs_step_with_aux(&mut s1, &b, &p).unwrap();
            assert!(aux.omega.iter().all(|&w| w > 0.0));
            assert_eq!(next, pg_gibbs_step(&mut s2, &b, &p).unwrap());
            b = next;
        }
        let bad = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(pg_gibbs_step(&mut s1, &bad, &p).is_err());
    }

    #[test]
    fn in_c_is_level_set_of_drift() {
        let ds = synthetic(20, 2, 4);
        let p = LogitPosterior::with_isotropic_prior(ds, 10.0, 0.49).unwrap();
        let l = p.l();
        let model = LogitModel::new(p, 1.5).unwrap();
        let p = model.posterior();
        assert!(logit_in_c(&DVector::zeros(2), p, 1.5));
        let edge = DVector::from_vec(vec![(1.5 * l).sqrt(), 0.0]);
        let r_level = 1.0 + edge.norm_squared();
        assert_eq!(model.in_c(&edge), r_level <= model.drift().r);
        let out = DVector::from_vec(vec![(1.5 * l).sqrt() * 1.0001, 0.0]);
        assert!(!model.in_c(&out));
        assert_relative_eq!(model.drift().r, 1.0 + 1.5 * l, epsilon = 1e-12);
    }

    #[test]
    fn proposal_is_deterministic_and_weight_finite() {
        let ds = synthetic(20, 2, 5);
        let model = LogitModel::new(LogitPosterior::with_isotropic_prior(ds, 10.0, 0.49).unwrap(), 1.5).unwrap();
        let a = model.propose(&mut derive_stream(1, "init", 7)).unwrap();
        let b = model.propose(&mut derive_stream(1, "init", 7)).unwrap();
        assert_eq!(a, b);
        assert!(model.log_weight(&a).is_finite());
        assert!(model.log_weight(&DVector::from_vec(vec![40.0, -40.0])).is_finite());
    }
}
