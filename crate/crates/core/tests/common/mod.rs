//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use wsnguard::ar::{ArConfig, ArEstimator};
use wsnguard::decision::ThresholdConfig;
use wsnguard::nn::NeuralNet;
use wsnguard::sim::{train_predictor, Scenario};

/// Batch least squares through nalgebra's SVD.
pub fn ols(rows: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let cols = rows[0].len();
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(targets);
    let x = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    x.iter().copied().collect()
}

/// Coefficients of a stable AR(d) process built from real roots inside
/// the unit disc: `x_t = Σ a_i x_{t-i} + …`.
pub fn stable_ar_coefficients<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    // Expand Π (1 - r_k z) and read off -coefficients.
    let mut poly = vec![1.0];
    for _ in 0..d {
        let r: f64 = rng.random_range(-0.8..0.8);
        let mut next = vec![0.0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= r * c;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

pub fn simulate_ar<R: Rng>(rng: &mut R, coeffs: &[f64], intercept: f64, n: usize) -> Vec<f64> {
    let d = coeffs.len();
    let mut xs = vec![0.0; d];
    for _ in 0..n + 50 {
        let t = xs.len();
        let noise: f64 = StandardNormal.sample(rng);
        let mut v = intercept + noise;
        for (i, a) in coeffs.iter().enumerate() {
            v += a * xs[t - 1 - i];
        }
        xs.push(v);
    }
    xs.split_off(xs.len() - n)
}

/// Regressors `[x_{t-1}, …, x_{t-d} (, 1)]` and targets `x_t`.
pub fn ar_design(series: &[f64], d: usize, intercept: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for t in d..series.len() {
        let mut row: Vec<f64> = (1..=d).map(|lag| series[t - lag]).collect();
        if intercept {
            row.push(1.0);
        }
        rows.push(row);
        targets.push(series[t]);
    }
    (rows, targets)
}

pub fn rls_fit(
    series: &[f64],
    d: usize,
    intercept: bool,
    forgetting: f64,
    init_scale: f64,
) -> Vec<f64> {
    let mut est = ArEstimator::new(ArConfig {
        order: d,
        forgetting,
        init_scale,
        include_intercept: intercept,
    })
    .unwrap();
    for &x in series {
        est.step(x).unwrap();
    }
    est.coefficients().to_vec()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// Output gradient wrt every parameter by central differences.
pub fn fd_gradient(net: &NeuralNet<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    (0..base.len())
        .map(|k| {
            let mut p = base.clone();
            p[k] = base[k] + h;
            probe.set_params(&p).unwrap();
            let up = probe.forward(x).unwrap();
            p[k] = base[k] - h;
            probe.set_params(&p).unwrap();
            let down = probe.forward(x).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn bp_gradient(net: &NeuralNet<f64>, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; net.param_count()];
    net.output_with_gradient(x, &mut g).unwrap();
    g
}

/// Worst entrywise relative error, entries below `floor` compared on an
/// absolute scale of `floor`.
pub fn max_entry_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// The trust loop written out directly from its description: a channel
/// increments on a breach unless its previous increment is at most `k`
/// steps old; both indicators clear once `W` steps pass without an
/// increment.
pub fn trust_trace(errs: &[(Option<f64>, Option<f64>)], cfg: &ThresholdConfig) -> Vec<(u32, u32)> {
    let k = i64::from(cfg.transitory_len);
    let w = i64::from(cfg.reset_window);
    let (mut b_ar, mut b_nn) = (0u32, 0u32);
    let (mut last_ar, mut last_nn): (Option<i64>, Option<i64>) = (None, None);
    let mut anchor = -1i64;
    let mut out = Vec::new();
    for (t, &(ea, en)) in errs.iter().enumerate() {
        let t = t as i64;
        let breach_ar = ea.is_some_and(|e| e.abs() > cfg.eps_ar);
        let breach_nn = en.is_some_and(|e| e.abs() > cfg.eps_nn);
        let free = |last: Option<i64>| last.is_none_or(|s| t - s > k);
        let inc_ar = breach_ar && free(last_ar);
        let inc_nn = breach_nn && free(last_nn);
        if inc_ar {
            b_ar += 1;
            last_ar = Some(t);
        }
        if inc_nn {
            b_nn += 1;
            last_nn = Some(t);
        }
        if inc_ar || inc_nn {
            anchor = t;
        } else if t - anchor >= w {
            b_ar = 0;
            b_nn = 0;
            anchor = t;
        }
        out.push((b_ar, b_nn));
    }
    out
}

/// The case-study net, trained once per test binary.
pub fn case_study_net() -> &'static NeuralNet<f64> {
    use std::sync::OnceLock;
    static NET: OnceLock<NeuralNet<f64>> = OnceLock::new();
    NET.get_or_init(|| {
        let s = Scenario::builtin("case1").unwrap();
        train_predictor(&s, &s.lm).expect("case-study training").0
    })
}
