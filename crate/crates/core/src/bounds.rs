//! Non-asymptotic error bounds for the MSC estimator and the drift
//! constants of the shipped models.
//!
//! Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};

use crate::engine::DriftSpec;
use crate::error::{MscError, Result};
use crate::linalg;

/// `γ + K/R`. Requires `R > K/(1-γ)`, so the result lies in `[γ, 1)`.
pub fn gamma_r(gamma: f64, k: f64, r: f64) -> Result<f64> {
    Ok(DriftSpec::new(gamma, k, r, true)?.gamma_r())
}

/// `∫ f dΠ <= K/(1-γ)` for any `f` satisfying the drift condition.
pub fn invariant_f_bound(gamma: f64, k: f64) -> f64 {
    k / (1.0 - gamma)
}

/// Upper bound on `E[Σ_{k=1..τ} f(X_k) | X_0 = x]` for a start `x ∈ C` with
/// drift values `V(x)` and `f(x)`.
pub fn return_sum_bound_at(drift: &DriftSpec, v: f64, f: f64) -> Result<f64> {
    drift.validate()?;
    Ok((v - 1.0 - (1.0 - drift.gamma) * f + 2.0 * drift.k) / (1.0 - drift.gamma_r()))
}

/// Supremum over `C` of [`return_sum_bound_at`] in geometric mode (`f = V`):
/// `(γ sup_C V - 1 + 2K) / (1 - γ_R)`.
pub fn return_sum_bound(drift: &DriftSpec, sup_v_c: f64) -> Result<f64> {
    return_sum_bound_at(drift, sup_v_c, sup_v_c)
}

/// Inputs of the geometric-drift bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricBoundInput {
    pub gamma: f64,
    pub k: f64,
    pub r: f64,
    pub m: f64,
    pub n: f64,
    /// `∫ w dΠ` or an estimate of it.
    pub w2: f64,
    pub sup_v_c: f64,
}

impl GeometricBoundInput {
    pub fn new(drift: &DriftSpec, m: usize, n: usize, w2: f64, sup_v_c: f64) -> Self {
        GeometricBoundInput {
            gamma: drift.gamma,
            k: drift.k,
            r: drift.r,
            m: m as f64,
            n: n as f64,
            w2,
            sup_v_c,
        }
    }

    pub fn drift(&self) -> Result<DriftSpec> {
        DriftSpec::new(self.gamma, self.k, self.r, true)
    }

    fn checked(&self) -> Result<f64> {
        let g = self.drift()?.gamma_r();
        if !(self.w2 >= 1.0) {
            return Err(MscError::invalid(format!("∫w dΠ must be >= 1, got {}", self.w2)));
        }
        if !(self.sup_v_c <= self.r * (1.0 + 1e-12)) {
            return Err(MscError::invalid(format!(
                "sup_C V = {} exceeds R = {} in geometric mode",
                self.sup_v_c, self.r
            )));
        }
        if !(self.m >= 1.0 && self.n >= 1.0) {
            return Err(MscError::invalid("M and N must be at least 1"));
        }
        Ok(g)
    }

    pub fn gamma_r(&self) -> Result<f64> {
        Ok(self.drift()?.gamma_r())
    }
}

/// `A_R = γ sup_C V + 2K - 1` (the `f = V` case).
pub fn a_r_constant(input: &GeometricBoundInput) -> f64 {
    input.gamma * input.sup_v_c + 2.0 * input.k - 1.0
}

/// Mean squared bias bound
/// `4 A_R² ∫w dΠ / (N (1-γ_R)²) - 2 A_R² / (N (1-γ_R)²)`.
pub fn bias_bound(input: &GeometricBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let a = a_r_constant(input);
    Ok((4.0 * input.w2 - 2.0) * a * a / (input.n * (1.0 - g).powi(2)))
}

/// The first bias term alone, `4 A_R² ∫w dΠ / (N (1-γ_R)²)`, which is what
/// enters the MSE bound.
pub fn bias_bound_leading(input: &GeometricBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let a = a_r_constant(input);
    Ok(4.0 * input.w2 * a * a / (input.n * (1.0 - g).powi(2)))
}

/// Conditional variance bound `((R+K)/M) ((γ_R/2) / (1 - γ_R/2))²`.
pub fn variance_bound(input: &GeometricBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let ratio = (0.5 * g) / (1.0 - 0.5 * g);
    Ok((input.r + input.k) / input.m * ratio * ratio)
}

fn mse_terms(input: &GeometricBoundInput, sqrt_w2: f64, a_coef: f64) -> Result<(f64, f64)> {
    let g = input.checked()?;
    let chains = g * (input.r + input.k).sqrt() / (input.m.sqrt() * (2.0 - g));
    let init = a_coef * sqrt_w2 / (input.n.sqrt() * (1.0 - g));
    Ok((chains, init))
}

/// MSE bound for `|φ| <= √V`:
/// `(γ_R √(R+K) / (√M (2-γ_R)) + 2 A_R √(∫w dΠ) / (√N (1-γ_R)))²`.
pub fn mse_bound(input: &GeometricBoundInput) -> Result<f64> {
    let (c, i) = mse_terms(input, input.w2.sqrt(), 2.0 * a_r_constant(input))?;
    Ok((c + i).powi(2))
}

/// `(6.25 γ_R R + 12.5 K) / (M (1-γ_R)²)`, valid when
/// `N/M >= (γ R + 2K) ∫w dΠ`.
pub fn simplified_mse_bound(input: &GeometricBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let required = (input.gamma * input.r + 2.0 * input.k) * input.w2;
    let ratio = input.n / input.m;
    if ratio < required {
        return Err(MscError::invalid(format!(
            "simplified bound needs N/M >= {required}, got N/M = {ratio}"
        )));
    }
    Ok((6.25 * g * input.r + 12.5 * input.k) / (input.m * (1.0 - g).powi(2)))
}

/// Inputs of the multiplicative-drift concentration bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultBoundInput {
    pub gamma: f64,
    pub k: f64,
    pub r: f64,
    /// `sup_C [V - (1-γ) f] + 2K`.
    pub b_r: f64,
    /// `sup w`.
    pub w_star: f64,
    pub eps: f64,
    pub m: f64,
    pub n: f64,
}

impl MultBoundInput {
    fn checked(&self) -> Result<f64> {
        let g = DriftSpec::new(self.gamma, self.k, self.r, false)?.gamma_r();
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(MscError::invalid(format!("eps = {} not in (0, 1)", self.eps)));
        }
        if !(self.w_star >= 1.0) {
            return Err(MscError::invalid(format!("w_* = {} must be >= 1", self.w_star)));
        }
        if !self.b_r.is_finite() {
            return Err(MscError::invalid("B_R must be finite"));
        }
        Ok(g)
    }
}

/// `B_R` when `f = V`: `γ sup_C V + 2K`.
pub fn b_r_geometric(gamma: f64, k: f64, sup_v_c: f64) -> f64 {
    gamma * sup_v_c + 2.0 * k
}

/// Bias tail bound `4 exp(-N ε² (1-γ_R)² / (2 e^{2B_R} w_*²))`.
pub fn concentration_bias(input: &MultBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let expo = input.n * input.eps.powi(2) * (1.0 - g).powi(2) / (2.0 * (2.0 * input.b_r).exp() * input.w_star.powi(2));
    Ok(4.0 * (-expo).exp())
}

/// Chain-average tail bound `2 exp(-M ε² (1-γ_R)² / (9 e^{2B_R}))`.
pub fn concentration_sum(input: &MultBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let expo = input.m * input.eps.powi(2) * (1.0 - g).powi(2) / (9.0 * (2.0 * input.b_r).exp());
    Ok(2.0 * (-expo).exp())
}

/// Total tail bound
/// `6 exp(-ε² (1-γ_R)² min{2M/9, N/w_*²} / (8 e^{2B_R}))`.
pub fn concentration_total(input: &MultBoundInput) -> Result<f64> {
    let g = input.checked()?;
    let size = (2.0 * input.m / 9.0).min(input.n / input.w_star.powi(2));
    let expo = input.eps.powi(2) * (1.0 - g).powi(2) * size / (8.0 * (2.0 * input.b_r).exp());
    Ok(6.0 * (-expo).exp())
}

/// Sample sizes from Markov's inequality applied to [`mse_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePlan {
    pub n: u64,
    pub m: u64,
}

/// Smallest `(N, M)` with `P(|error| >= ε) <= δ`, giving half of the
/// root-MSE budget `ε√δ` to each of the two terms of [`mse_bound`]:
/// `M = ⌈4a²/(δε²)⌉`, `N = ⌈4b²/(δε²)⌉` with `a = γ_R√(R+K)/(2-γ_R)` and
/// `b = 2A_R√w2/(1-γ_R)`.
pub fn plan_sizes(eps: f64, delta: f64, gamma: f64, k: f64, r: f64, w2: f64, sup_v_c: f64) -> Result<SamplePlan> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(MscError::invalid(format!("eps = {eps}, delta = {delta} must lie in (0, 1)")));
    }
    let probe = GeometricBoundInput {
        gamma,
        k,
        r,
        m: 1.0,
        n: 1.0,
        w2,
        sup_v_c,
    };
    let g = probe.checked()?;
    let a = g * (r + k).sqrt() / (2.0 - g);
    let b = 2.0 * a_r_constant(&probe) * w2.sqrt() / (1.0 - g);
    let budget = delta * eps * eps;
    let to_count = |x: f64| -> Result<u64> {
        let c = x.ceil().max(1.0);
        if c >= u64::MAX as f64 {
            return Err(MscError::invalid(format!("planned size {c:e} overflows")));
        }
        Ok(c as u64)
    };
    Ok(SamplePlan {
        m: to_count(4.0 * a * a / budget)?,
        n: to_count(4.0 * b * b / budget)?,
    })
}

/// Drift and proposal constants of the Gaussian AR(1) model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArConstants {
    pub gamma: f64,
    pub k: f64,
    pub r: f64,
    pub w2: f64,
    pub sup_v_c: f64,
}

impl ArConstants {
    pub fn drift(&self) -> Result<DriftSpec> {
        DriftSpec::new(self.gamma, self.k, self.r, true)
    }
}

/// `(1/(2√(2h)) + √(h/2))^d`, the second moment of the weight of a
/// `N(0, (1/2+h) Σ)` proposal against `N(0, Σ)`.
pub fn gaussian_proposal_factor(h: f64, d: usize) -> f64 {
    proposal_base(h).powi(d as i32)
}

fn proposal_base(h: f64) -> f64 {
    1.0 / (2.0 * (2.0 * h).sqrt()) + (h / 2.0).sqrt()
}

/// `γ = ρ²`, `K = (1-ρ²)(1+d)`, `R = 1 + r d`, `sup_C V = R` and the closed
/// form of `∫ w dΓ`.
pub fn ar_constants(rho: f64, d: usize, h: f64, r: f64) -> Result<ArConstants> {
    if !(rho > 0.0 && rho < 1.0) || d == 0 || !(h > 0.0) || !(r > 1.0) {
        return Err(MscError::invalid(format!(
            "AR constants need rho in (0,1), d >= 1, h > 0, r > 1; got rho={rho}, d={d}, h={h}, r={r}"
        )));
    }
    let gamma = rho * rho;
    let level = 1.0 + r * d as f64;
    Ok(ArConstants {
        gamma,
        k: (1.0 - gamma) * (1.0 + d as f64),
        r: level,
        w2: gaussian_proposal_factor(h, d),
        sup_v_c: level,
    })
}

/// Constants of the Pólya-Gamma Gibbs drift and the Gaussian proposal
/// `N(β*, (1/2+h) Σ)` bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgConstants {
    /// `||Σ||₂² ||Xᵀ(Y - ½)||₂²`.
    pub l: f64,
    /// `(1 + L)/(1 + rL)`.
    pub gamma_r: f64,
    /// `1 + rL`.
    pub r: f64,
    /// `1 + L`.
    pub k: f64,
    /// `K + tr(Σ)`, the constant the one-step expectation actually obeys.
    pub k_with_trace: f64,
    /// `||XᵀX||₂ / 4`, the uniform Hessian bound of the negative log-likelihood.
    pub lambda_star: f64,
    pub x_norm_sq: f64,
    pub log_w_d: f64,
    pub log_chi2_bound: f64,
    pub d: usize,
}

impl PgConstants {
    pub fn w_d(&self) -> f64 {
        self.log_w_d.exp()
    }

    pub fn chi2_bound(&self) -> f64 {
        self.log_chi2_bound.exp()
    }

    /// The drift as `PV <= K` (γ = 0) with `C = {V <= 1 + rL}`. Fails when
    /// `L = 0`, where `R = K` sits on the excluded boundary.
    pub fn drift(&self) -> Result<DriftSpec> {
        DriftSpec::new(0.0, self.k, self.r, true)
    }

    /// [`GeometricBoundInput`] for these constants with `∫w dΠ` set to
    /// `w2`. `sup_C V = R`.
    pub fn bound_input(&self, m: usize, n: usize, w2: f64) -> Result<GeometricBoundInput> {
        Ok(GeometricBoundInput::new(&self.drift()?, m, n, w2, self.r))
    }
}

pub fn pg_constants(x: &DMatrix<f64>, y: &DVector<f64>, sigma: &DMatrix<f64>, h: f64, r: f64) -> Result<PgConstants> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(MscError::invalid(format!("X has {n} rows, Y has {} entries", y.len())));
    }
    if sigma.shape() != (d, d) {
        return Err(MscError::invalid(format!("Sigma must be {d}x{d}")));
    }
    if !linalg::is_symmetric(sigma, 1e-12) {
        return Err(MscError::Factorization("Sigma is not symmetric".into()));
    }
    linalg::cholesky(sigma, "Sigma")?;
    if !(h > 0.0 && h <= 0.5) || !(r > 1.0) {
        return Err(MscError::invalid(format!("need h in (0, 1/2] and r > 1; got h={h}, r={r}")));
    }
    let centered = y.map(|v| v - 0.5);
    let score = x.transpose() * centered;
    let sigma_norm = linalg::largest_eigenvalue_psd(sigma, linalg::POWER_ITERATION_TOL)?;
    let l = sigma_norm * sigma_norm * score.norm_squared();
    let x_norm_sq = linalg::spectral_norm_sq(x)?;
    let lambda_star = x_norm_sq / 4.0;
    let log_det = linalg::log_det_spd(&(sigma * lambda_star + DMatrix::identity(d, d)))?;
    let log_factor = d as f64 * proposal_base(h).ln();
    let k = 1.0 + l;
    Ok(PgConstants {
        l,
        gamma_r: k / (1.0 + r * l),
        r: 1.0 + r * l,
        k,
        k_with_trace: k + sigma.trace(),
        lambda_star,
        x_norm_sq,
        log_w_d: log_det + log_factor,
        log_chi2_bound: log_det + log_factor,
        d,
    })
}

/// How the importance-sampling term of the Pólya-Gamma MSE bound is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgBoundMode {
    /// The general MSE template: `2A_R √(∫w dΠ)` with `∫w dΠ <= chi2_bound`.
    Theorem,
    /// As printed for the Pólya-Gamma sampler: `(2L+1) W_d`, i.e. `A_R W_d`.
    Literal,
}

/// MSE bound for the Pólya-Gamma MSC estimator.
pub fn pg_mse_bound(pg: &PgConstants, m: usize, n: usize, mode: PgBoundMode) -> Result<f64> {
    let input = pg.bound_input(m, n, 1.0)?;
    let g = input.gamma_r()?;
    let a = a_r_constant(&input);
    let (sqrt_w2, coef) = match mode {
        PgBoundMode::Theorem => ((0.5 * pg.log_chi2_bound).exp(), 2.0 * a),
        PgBoundMode::Literal => (pg.w_d(), a),
    };
    let (c, i) = mse_terms(&input, sqrt_w2, coef)?;
    debug_assert!((g - pg.gamma_r).abs() <= 1e-12 * g.max(1.0));
    Ok((c + i).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ar_input(m: f64, n: f64) -> GeometricBoundInput {
        let c = ar_constants(0.9, 2, 0.49, 1.5).unwrap();
        GeometricBoundInput {
            gamma: c.gamma,
            k: c.k,
            r: c.r,
            m,
            n,
            w2: c.w2,
            sup_v_c: c.sup_v_c,
        }
    }

    #[test]
    fn gamma_r_examples() {
        assert_relative_eq!(gamma_r(0.3, 1e-300, 5.0).unwrap(), 0.3);
        let g = gamma_r(0.81, 0.57, 4.0).unwrap();
        assert_relative_eq!(g, 0.9525, epsilon = 1e-12);
        let (rho, d, r) = (0.9f64, 2.0, 1.5);
        let rho_r = rho * rho + (1.0 - rho * rho) * (d + 1.0) / (r * d + 1.0);
        assert_relative_eq!(g, rho_r, epsilon = 1e-12);
        assert!(gamma_r(0.5, 1.0, 2.0).is_err());
    }

    #[test]
    fn a_r_examples() {
        let mut inp = ar_input(10.0, 10.0);
        assert_relative_eq!(a_r_constant(&inp), 3.38, epsilon = 1e-12);
        inp.gamma = 0.0;
        inp.k = 1.0;
        assert_eq!(a_r_constant(&inp), 1.0);
        // γ = 0, K = 1 + L gives 2L + 1.
        let l = 7.5;
        inp.k = 1.0 + l;
        assert_eq!(a_r_constant(&inp), 2.0 * l + 1.0);
    }

    #[test]
    fn bias_bound_examples() {
        let mut inp = ar_input(10.0, 1000.0);
        inp.w2 = 1.0;
        let g = inp.gamma_r().unwrap();
        let a = a_r_constant(&inp);
        assert_relative_eq!(bias_bound(&inp).unwrap(), 2.0 * a * a / (1000.0 * (1.0 - g).powi(2)), max_relative = 1e-14);
        let b1 = bias_bound(&inp).unwrap();
        inp.n *= 2.0;
        assert_relative_eq!(bias_bound(&inp).unwrap(), b1 / 2.0, max_relative = 1e-14);
        inp.w2 = 0.5;
        assert!(bias_bound(&inp).is_err());
    }

    #[test]
    fn variance_bound_examples() {
        let inp = ar_input(1e5, 1.0);
        let v = variance_bound(&inp).unwrap();
        let expected = 4.57 / 1e5 * (0.47625f64 / 0.52375).powi(2);
        assert_relative_eq!(v, expected, max_relative = 1e-12);
        assert!((v - 3.78e-5).abs() < 0.01e-5);
        let mut half = inp;
        half.m *= 2.0;
        assert_relative_eq!(variance_bound(&half).unwrap(), v / 2.0, max_relative = 1e-14);
        // γ_R -> 0 limit.
        let tiny = GeometricBoundInput {
            gamma: 0.0,
            k: 1e-12,
            r: 10.0,
            m: 1.0,
            n: 1.0,
            w2: 1.0,
            sup_v_c: 10.0,
        };
        assert!(variance_bound(&tiny).unwrap() < 1e-20);
    }

    #[test]
    fn mse_is_sum_of_root_terms() {
        for &(m, n) in &[(10.0, 10.0), (1.5e4, 8.1e7), (123.0, 4567.0)] {
            let inp = ar_input(m, n);
            let combined = (variance_bound(&inp).unwrap().sqrt() + bias_bound_leading(&inp).unwrap().sqrt()).powi(2);
            assert_relative_eq!(mse_bound(&inp).unwrap(), combined, max_relative = 1e-12);
        }
    }

    #[test]
    fn mse_monotone() {
        let mut prev = f64::INFINITY;
        for e in 1..8 {
            let v = mse_bound(&ar_input(10f64.powi(e), 1e6)).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for e in 1..10 {
            let v = mse_bound(&ar_input(1e4, 10f64.powi(e))).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn simplified_bound() {
        let inp = GeometricBoundInput {
            gamma: 0.25,
            k: 0.5,
            r: 2.0,
            m: 100.0,
            n: 1e6,
            w2: 1.0,
            sup_v_c: 2.0,
        };
        assert_relative_eq!(inp.gamma_r().unwrap(), 0.5);
        assert_relative_eq!(simplified_mse_bound(&inp).unwrap(), 0.5, max_relative = 1e-14);
        let mut more = inp;
        more.n = 1e9;
        assert_eq!(simplified_mse_bound(&more).unwrap(), simplified_mse_bound(&inp).unwrap());
        let mut short = inp;
        short.n = 100.0;
        let err = simplified_mse_bound(&short).unwrap_err().to_string();
        assert!(err.contains("N/M >= 1.5"), "{err}");
    }

    fn mult(eps: f64, m: f64, n: f64) -> MultBoundInput {
        // γ_R = 0.5 with γ = 0.25, K = 0.5, R = 2.
        MultBoundInput {
            gamma: 0.25,
            k: 0.5,
            r: 2.0,
            b_r: 1.0,
            w_star: 2.0,
            eps,
            m,
            n,
        }
    }

    #[test]
    fn concentration_examples() {
        let b = concentration_bias(&mult(0.1, 1.0, 1e6)).unwrap();
        let expo = 1e6 * 0.01 * 0.25 / (2.0 * 2f64.exp() * 4.0);
        assert_relative_eq!(b, 4.0 * (-expo).exp(), max_relative = 1e-12);
        assert!((expo - 42.3).abs() < 0.05);
        let s = concentration_sum(&mult(0.1, 1e5, 1.0)).unwrap();
        let expo = 1e5 * 0.01 * 0.25 / (9.0 * 2f64.exp());
        assert_relative_eq!(s, 2.0 * (-expo).exp(), max_relative = 1e-12);
        assert!((expo - 3.76).abs() < 0.01);
        assert!(concentration_bias(&mult(0.1, 1.0, 1.0)).unwrap() <= 4.0);
        assert!(concentration_sum(&mult(0.1, 1.0, 1.0)).unwrap() <= 2.0);
        assert!(concentration_total(&mult(0.1, 1.0, 1.0)).unwrap() <= 6.0);
        assert!(concentration_bias(&mult(1.0, 1.0, 1.0)).is_err());
        assert!(concentration_bias(&mult(0.1, 1.0, 2e6)).unwrap() < b);
        assert!(concentration_sum(&mult(0.1, 2e5, 1.0)).unwrap() < s);
    }

    #[test]
    fn concentration_total_crossover() {
        // 2M/9 = N/w*² at M = 9N/8 when w* = 2.
        let n = 8000.0;
        let m = 9.0 * n / (2.0 * 4.0);
        let at = concentration_total(&mult(0.2, m, n)).unwrap();
        let size = 2.0 * m / 9.0;
        assert_relative_eq!(size, n / 4.0, max_relative = 1e-14);
        let expo = 0.04 * 0.25 * size / (8.0 * 2f64.exp());
        assert_relative_eq!(at, 6.0 * (-expo).exp(), max_relative = 1e-12);
        // Increasing either side alone past the crossover changes nothing.
        assert_eq!(concentration_total(&mult(0.2, 2.0 * m, n)).unwrap(), at);
        assert_eq!(concentration_total(&mult(0.2, m, 2.0 * n)).unwrap(), at);
    }

    #[test]
    fn ar_constants_examples() {
        for d in [1, 2, 7, 30] {
            let c = ar_constants(0.9, d, 0.5, 1.5).unwrap();
            assert_relative_eq!(c.w2, 1.0, epsilon = 1e-14);
            assert_relative_eq!(invariant_f_bound(c.gamma, c.k), 1.0 + d as f64, epsilon = 1e-12);
        }
        let c = ar_constants(0.9, 2, 0.49, 1.5).unwrap();
        assert_relative_eq!(c.gamma, 0.81, epsilon = 1e-15);
        assert_relative_eq!(c.k, 0.57, epsilon = 1e-15);
        assert_eq!(c.r, 4.0);
        assert_eq!(c.sup_v_c, 4.0);
        assert!(ar_constants(1.0, 2, 0.49, 1.5).is_err());
        assert!(ar_constants(0.9, 2, 0.49, 1.0).is_err());
    }

    #[test]
    fn return_sum_bound_ar() {
        let c = ar_constants(0.9, 2, 0.49, 1.5).unwrap();
        let drift = c.drift().unwrap();
        let bound = return_sum_bound(&drift, c.sup_v_c).unwrap();
        assert_relative_eq!(bound, 3.38 / 0.0475, max_relative = 1e-12);
    }

    #[test]
    fn plan_round_trip_and_reference() {
        let c = ar_constants(0.9, 2, 0.49, 1.5).unwrap();
        let plan = plan_sizes(0.1, 0.1, c.gamma, c.k, c.r, c.w2, c.sup_v_c).unwrap();
        // Values from an independent scalar evaluation of the two formulas.
        assert_eq!(plan.m, 15_115);
        assert_eq!(plan.n, 81_023_403);
        let inp = GeometricBoundInput {
            m: plan.m as f64,
            n: plan.n as f64,
            ..ar_input(1.0, 1.0)
        };
        assert!(mse_bound(&inp).unwrap() <= 0.1 * 0.01);
        assert!(plan_sizes(1.0, 0.1, c.gamma, c.k, c.r, c.w2, c.sup_v_c).is_err());
        assert!(plan_sizes(0.1, 0.1, 0.5, 1.0, 2.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn pg_scalar_example() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, 1.0);
        let sigma = DMatrix::from_element(1, 1, 10.0);
        let pg = pg_constants(&x, &y, &sigma, 0.49, 1.001).unwrap();
        assert_relative_eq!(pg.l, 25.0, max_relative = 1e-10);
        assert_relative_eq!(pg.gamma_r, 26.0 / 26.025, max_relative = 1e-10);
        assert!((pg.gamma_r - 0.99904).abs() < 1e-5);
        assert_relative_eq!(pg.k_with_trace, 36.0, max_relative = 1e-10);
        // ||X||₂² / 4 is λ*; both determinant arguments coincide.
        assert_relative_eq!(pg.lambda_star, 0.25, max_relative = 1e-10);
        assert_eq!(pg.log_w_d, pg.log_chi2_bound);
        let expected = (10.0f64 * 0.25 + 1.0) * gaussian_proposal_factor(0.49, 1);
        assert_relative_eq!(pg.chi2_bound(), expected, max_relative = 1e-10);
    }

    #[test]
    fn pg_balanced_is_invalid() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let sigma = DMatrix::from_element(1, 1, 10.0);
        let pg = pg_constants(&x, &y, &sigma, 0.49, 1.5).unwrap();
        assert_eq!(pg.l, 0.0);
        assert_eq!(pg.gamma_r, 1.0);
        assert!(pg.drift().is_err());
    }

    #[test]
    fn pg_rejects_non_spd_sigma() {
        let x = DMatrix::from_element(1, 2, 1.0);
        let y = DVector::from_element(1, 1.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(pg_constants(&x, &y, &bad, 0.49, 1.5), Err(MscError::Factorization(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(pg_constants(&x, &y, &asym, 0.49, 1.5).is_err());
    }

    #[test]
    fn pg_literal_bound_matches_printed_expression() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 1.2, 2.0, 0.1]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = 1.3;
        let pg = pg_constants(&x, &y, &sigma, 0.4, r).unwrap();
        for &(m, n) in &[(100usize, 1000usize), (10_000, 1_000_000)] {
            let (l, g, w) = (pg.l, pg.gamma_r, pg.w_d());
            let printed = (g * ((r + 1.0) * l + 2.0).sqrt() / ((m as f64).sqrt() * (2.0 - g))
                + (2.0 * l + 1.0) * w / ((n as f64).sqrt() * (1.0 - g)))
            .powi(2);
            // The printed coefficient is A_R = 2L+1 rather than 2A_R, so the
            // general template reproduces it with √w2 = W_d / 2.
            let composed = mse_bound(&pg.bound_input(m, n, 0.25 * w * w).unwrap()).unwrap();
            assert_relative_eq!(composed, printed, max_relative = 1e-12);
            assert_relative_eq!(pg_mse_bound(&pg, m, n, PgBoundMode::Literal).unwrap(), printed, max_relative = 1e-12);
            let theorem = pg_mse_bound(&pg, m, n, PgBoundMode::Theorem).unwrap();
            let expected = (g * ((r + 1.0) * l + 2.0).sqrt() / ((m as f64).sqrt() * (2.0 - g))
                + 2.0 * (2.0 * l + 1.0) * w.sqrt() / ((n as f64).sqrt() * (1.0 - g)))
            .powi(2);
            assert_relative_eq!(theorem, expected, max_relative = 1e-12);
        }
    }
}
