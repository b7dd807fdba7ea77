mod common;

use common::pg_sum_of_gammas;
use msc_core::derive_stream;
use msc_core::polya_gamma::{polya_gamma_mean, sample_polya_gamma};
use msc_core::stats::{ks_critical_value, ks_statistic, mean_and_sd};

#[test]
fn oracle_mean_is_exact() {
    let mut s = derive_stream(1, "oracle", 0);
    for b in [0.0, 2.0] {
        let xs: Vec<f64> = (0..20_000).map(|_| pg_sum_of_gammas(&mut s, b)).collect();
        let (m, sd) = mean_and_sd(&xs);
        assert!((m - polya_gamma_mean(b)).abs() <= 4.0 * sd / (xs.len() as f64).sqrt());
    }
}

#[test]
fn sampler_agrees_with_sum_of_gammas_in_distribution() {
    let n = 100_000;
    for (i, b) in [0.0, 0.5, 1.0, 3.0].into_iter().enumerate() {
        let mut s = derive_stream(2, "pg", i as u64);
        let mut o = derive_stream(2, "oracle", i as u64);
        let exact: Vec<f64> = (0..n).map(|_| sample_polya_gamma(&mut s, b).unwrap()).collect();
        let oracle: Vec<f64> = (0..n).map(|_| pg_sum_of_gammas(&mut o, b)).collect();
        let d = ks_statistic(&exact, &oracle);
        let crit = ks_critical_value(n, n, 0.001);
        assert!(d <= crit, "b = {b}: KS {d} > {crit}");
    }
}
