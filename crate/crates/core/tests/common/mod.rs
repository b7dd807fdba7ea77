//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use msc_core::logit::{sigmoid, Dataset};
use msc_core::sampling::sample_std_normal;
use msc_core::{derive_stream, RngStream};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Exp1};

/// Terms kept in the truncated sum-of-gammas representation.
pub const PG_ORACLE_TERMS: usize = 1000;

/// PG(1, b) from its infinite-convolution representation
/// `(1/2π²) Σ_k g_k / ((k - 1/2)² + b²/4π²)`, `g_k ~ Exp(1)`, truncated
/// after [`PG_ORACLE_TERMS`] terms; the tail is replaced by its mean.
pub fn pg_sum_of_gammas(stream: &mut RngStream, b: f64) -> f64 {
    let c = b * b / (4.0 * PI * PI);
    let mut head = 0.0;
    let mut head_mean = 0.0;
    for k in 1..=PG_ORACLE_TERMS {
        let denom = (k as f64 - 0.5).powi(2) + c;
        let g: f64 = Exp1.sample(stream);
        head += g / denom;
        head_mean += 1.0 / denom;
    }
    let scale = 1.0 / (2.0 * PI * PI);
    let total_mean = if b == 0.0 { 0.25 } else { (b / 2.0).tanh() / (2.0 * b) };
    scale * head + (total_mean - scale * head_mean)
}

pub fn heart_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/processed.cleveland.data")
}

/// Logistic data with standard-normal covariates, an intercept last and a
/// fixed true coefficient vector.
pub fn synthetic_logistic(n: usize, d: usize, seed: u64) -> Dataset {
    let mut s = derive_stream(seed, "synthetic", 0);
    let x = DMatrix::from_fn(n, d, |_, j| if j == d - 1 { 1.0 } else { sample_std_normal(&mut s) });
    let truth: Vec<f64> = (0..d).map(|j| 0.8 - 0.5 * j as f64).collect();
    let y = DVector::from_fn(n, |i, _| {
        let t: f64 = (0..d).map(|j| x[(i, j)] * truth[j]).sum();
        if s.uniform() < sigmoid(t) {
            1.0
        } else {
            0.0
        }
    });
    Dataset::new(x, y, (0..d).map(|j| format!("b{j}")).collect()).unwrap()
}

/// Two mirrored observations `(x=1, y=1)` and `(x=1, y=0)`.
pub fn mirrored_pair() -> Dataset {
    Dataset::new(
        DMatrix::from_element(2, 1, 1.0),
        DVector::from_vec(vec![1.0, 0.0]),
        vec!["b".into()],
    )
    .unwrap()
}

/// `|a - b| / sqrt(se_a² + se_b²)`.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    (a - b).abs() / (se_a * se_a + se_b * se_b).sqrt()
}
