//! Offline Levenberg-Marquardt training.
//!
//! Residuals `r_i = f(x_i; θ) - y_i` are taken in normalized target units.
//! Each epoch builds the Jacobian `J` row by row with reverse-mode
//! differentiation and solves the damped system
//! `(JᵀJ + μI) Δ = -Jᵀr`. When there are fewer samples than parameters the
//! equivalent `Δ = -Jᵀ (JJᵀ + μI)⁻¹ r` is solved instead, which only needs an
//! `N × N` factorization.
//!
//! Optionally a seeded fraction of the samples is held out; training stops
//! once the held-out error has failed to improve for a number of epochs in a
//! row, and the best held-out parameters are kept.

use log::debug;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{NetTopologySpec, NeuralNet};
use super::normalize::{Affine, Normalization};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, dot, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    /// Damping above which training stops.
    pub mu_max: f64,
    pub max_epochs: usize,
    /// Stop when `‖Jᵀr‖∞ / N` falls below this.
    pub grad_tol: f64,
    /// Stop when the normalized mean squared error falls below this.
    pub loss_tol: f64,
    pub max_params: usize,
    pub seed: u64,
    /// Share of samples held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    /// Consecutive epochs without held-out improvement before stopping.
    pub max_validation_fails: usize,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            mu_max: 1e10,
            max_epochs: 200,
            grad_tol: 1e-8,
            loss_tol: 1e-12,
            max_params: 5000,
            seed: 42,
            validation_fraction: 0.0,
            max_validation_fails: 6,
        }
    }
}

impl LmConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.mu_init > 0.0) {
            v.push(format!("lm.mu_init must be positive, got {}", self.mu_init));
        }
        if !(self.mu_increase > 1.0) {
            v.push(format!(
                "lm.mu_increase must exceed 1, got {}",
                self.mu_increase
            ));
        }
        if !(self.mu_decrease > 0.0 && self.mu_decrease < 1.0) {
            v.push(format!(
                "lm.mu_decrease must lie in (0, 1), got {}",
                self.mu_decrease
            ));
        }
        if !(self.mu_max > self.mu_init) {
            v.push("lm.mu_max must exceed lm.mu_init".to_string());
        }
        if !(self.grad_tol > 0.0) {
            v.push(format!(
                "lm.grad_tol must be positive, got {}",
                self.grad_tol
            ));
        }
        if !(self.loss_tol > 0.0) {
            v.push(format!(
                "lm.loss_tol must be positive, got {}",
                self.loss_tol
            ));
        }
        if self.max_params == 0 {
            v.push("lm.max_params must be positive".to_string());
        }
        if !(0.0..0.9).contains(&self.validation_fraction) {
            v.push(format!(
                "lm.validation_fraction must lie in [0, 0.9), got {}",
                self.validation_fraction
            ));
        }
        if self.max_validation_fails == 0 {
            v.push("lm.max_validation_fails must be positive".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(msg) => Err(Error::Config(msg)),
            None => Ok(()),
        }
    }
}

/// Raw (physical-unit) samples plus the scaling fitted on them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    inputs: Matrix<T>,
    targets: Vec<T>,
    normalization: Normalization<T>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(inputs: Matrix<T>, targets: Vec<T>) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::dim("training targets", inputs.rows(), targets.len()));
        }
        if targets.is_empty() {
            return Err(Error::Config("training set is empty".into()));
        }
        if inputs
            .as_slice()
            .iter()
            .chain(&targets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NumericInput("training set"));
        }
        let normalization = Normalization {
            inputs: (0..inputs.cols())
                .map(|c| Affine::fit((0..inputs.rows()).map(|r| inputs[(r, c)])))
                .collect(),
            output: Affine::fit(targets.iter().copied()),
        };
        Ok(Self {
            inputs,
            targets,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &Matrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn normalization(&self) -> &Normalization<T> {
        &self.normalization
    }

    fn normalized(&self) -> (Matrix<T>, Vec<T>) {
        let mut x = self.inputs.clone();
        for r in 0..x.rows() {
            let row = self.normalization.normalize_input(x.row(r));
            x.row_mut(r).copy_from_slice(&row);
        }
        let y = self
            .targets
            .iter()
            .map(|&t| self.normalization.normalize_output(t))
            .collect();
        (x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    GradientTolerance,
    LossTolerance,
    DampingLimit,
    ValidationStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: usize,
    /// Normalized MSE: the initial value, then one entry per accepted step.
    pub loss_curve: Vec<f64>,
    pub final_gradient_norm: f64,
    /// Training RMSE in the target's physical units.
    pub rmse: f64,
    pub final_mu: f64,
    pub stop_reason: StopReason,
    /// Held-out RMSE in physical units, per epoch from the initial net on;
    /// empty without a held-out split.
    pub validation_rmse: Vec<f64>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainingReport {
    pub fn final_loss(&self) -> f64 {
        *self
            .loss_curve
            .last()
            .expect("loss curve starts with the initial loss")
    }
}

struct Problem<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
}

impl<T: Scalar> Problem<'_, T> {
    fn residuals(&self, net: &NeuralNet<T>) -> Vec<T> {
        (0..self.x.rows())
            .map(|i| net.forward_unchecked(self.x.row(i)) - self.y[i])
            .collect()
    }

    fn jacobian(&self, net: &NeuralNet<T>) -> (Matrix<T>, Vec<T>) {
        let n = self.x.rows();
        let p = net.param_count();
        let mut jac = Matrix::zeros(n, p);
        let mut r = Vec::with_capacity(n);
        for i in 0..n {
            let out = net.gradient_unchecked(self.x.row(i), jac.row_mut(i));
            r.push(out - self.y[i]);
        }
        (jac, r)
    }
}

fn mse<T: Scalar>(r: &[T]) -> f64 {
    dot(r, r).as_f64() / r.len() as f64
}

/// Damped normal-equation system prepared once per epoch.
enum Normal<T> {
    /// `JᵀJ` (`P × P`) and `-Jᵀr`.
    Primal { jtj: Matrix<T>, neg_grad: Vec<T> },
    /// `JJᵀ` (`N × N`) and `r`.
    Dual { jjt: Matrix<T>, r: Vec<T> },
}

impl<T: Scalar> Normal<T> {
    fn build(jac: &Matrix<T>, r: &[T], grad: &[T]) -> Self {
        let (n, p) = (jac.rows(), jac.cols());
        if n < p {
            let mut jjt = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v = dot(jac.row(i), jac.row(j));
                    jjt[(i, j)] = v;
                    jjt[(j, i)] = v;
                }
            }
            Normal::Dual { jjt, r: r.to_vec() }
        } else {
            let mut jtj = Matrix::zeros(p, p);
            for i in 0..n {
                let row = jac.row(i);
                for a in 0..p {
                    let ja = row[a];
                    if ja == T::zero() {
                        continue;
                    }
                    let dst = &mut jtj.row_mut(a)[..=a];
                    for (d, &jb) in dst.iter_mut().zip(&row[..=a]) {
                        *d += ja * jb;
                    }
                }
            }
            Normal::Primal {
                jtj,
                neg_grad: grad.iter().map(|&g| -g).collect(),
            }
        }
    }

    /// Step for damping `mu`, or `None` if the damped matrix is not
    /// numerically positive definite.
    fn solve(&self, jac: &Matrix<T>, mu: T) -> Option<Vec<T>> {
        let (mut m, rhs) = match self {
            Normal::Primal { jtj, neg_grad } => (jtj.clone(), neg_grad),
            Normal::Dual { jjt, r } => (jjt.clone(), r),
        };
        for i in 0..m.rows() {
            m[(i, i)] += mu;
        }
        if !cholesky_in_place(&mut m) {
            return None;
        }
        let sol = cholesky_solve(&m, rhs);
        let step = match self {
            Normal::Primal { .. } => sol,
            Normal::Dual { .. } => jac.tr_mul_vec(&sol).into_iter().map(|v| -v).collect(),
        };
        step.iter().all(|v| v.is_finite()).then_some(step)
    }
}

type Split<T> = ((Matrix<T>, Vec<T>), Option<(Matrix<T>, Vec<T>)>);

/// Seeded held-out split; sample order is kept within each part.
fn split<T: Scalar>(x: Matrix<T>, y: Vec<T>, cfg: &LmConfig) -> Split<T> {
    let n = y.len();
    let n_val = (cfg.validation_fraction * n as f64).round() as usize;
    if n_val == 0 || n_val >= n {
        return ((x, y), None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut held = vec![false; n];
    for i in index::sample(&mut rng, n, n_val) {
        held[i] = true;
    }
    let cols = x.cols();
    let take = |want: bool| {
        let rows: Vec<usize> = (0..n).filter(|&i| held[i] == want).collect();
        let buf = rows
            .iter()
            .flat_map(|&i| x.row(i).iter().copied())
            .collect();
        let m = Matrix::from_row_major(rows.len(), cols, buf).expect("selected rows");
        (m, rows.iter().map(|&i| y[i]).collect::<Vec<T>>())
    };
    (take(false), Some(take(true)))
}

/// Trains a freshly initialized net (seeded by `cfg.seed`).
pub fn lm_train<T: Scalar>(
    spec: &NetTopologySpec,
    data: &TrainingSet<T>,
    cfg: &LmConfig,
) -> Result<(NeuralNet<T>, TrainingReport)> {
    let net = NeuralNet::random(spec.clone(), cfg.seed)?;
    lm_refine(net, data, cfg)
}

/// Continues LM iterations from the given parameters. The net's
/// normalization is replaced with the training set's.
pub fn lm_refine<T: Scalar>(
    mut net: NeuralNet<T>,
    data: &TrainingSet<T>,
    cfg: &LmConfig,
) -> Result<(NeuralNet<T>, TrainingReport)> {
    cfg.validate()?;
    let spec = net.spec().clone();
    if data.inputs().cols() != spec.input_size() {
        return Err(Error::dim(
            "training inputs",
            spec.input_size(),
            data.inputs().cols(),
        ));
    }
    if net.param_count() > cfg.max_params {
        return Err(Error::Config(format!(
            "{} parameters exceed the LM cap of {}",
            net.param_count(),
            cfg.max_params
        )));
    }
    net.set_normalization(data.normalization().clone())?;
    let target_scale = data.normalization().output.scale.as_f64();

    let (x_all, y_all) = data.normalized();
    let ((x, y), held_out) = split(x_all, y_all, cfg);
    if y.is_empty() {
        return Err(Error::Config(
            "no training samples left after the held-out split".into(),
        ));
    }
    let problem = Problem { x: &x, y: &y };
    let validation = held_out.as_ref().map(|(x, y)| Problem { x, y });
    let n = y.len() as f64;
    let val_rmse =
        |net: &NeuralNet<T>, v: &Problem<'_, T>| mse(&v.residuals(net)).sqrt() * target_scale;
    let mut validation_rmse = Vec::new();
    if let Some(v) = &validation {
        validation_rmse.push(val_rmse(&net, v));
    }
    let mut best = (
        0,
        net.params(),
        validation_rmse.first().copied().unwrap_or(f64::INFINITY),
    );
    let mut fails = 0;

    let mut params = net.params();
    let (mut jac, mut r) = problem.jacobian(&net);
    let mut loss = mse(&r);
    if !loss.is_finite() {
        return Err(Error::Training {
            reason: "initial loss is not finite".into(),
            epochs: 0,
        });
    }
    let mut loss_curve = vec![loss];
    let mut mu = cfg.mu_init;
    let mut epochs = 0;
    let mut grad = jac.tr_mul_vec(&r);
    let grad_norm = |g: &[T]| g.iter().fold(0.0_f64, |m, v| m.max(v.as_f64().abs())) / n;

    let stop_reason = loop {
        if loss <= cfg.loss_tol {
            break StopReason::LossTolerance;
        }
        if grad_norm(&grad) <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if epochs >= cfg.max_epochs {
            break StopReason::MaxEpochs;
        }
        epochs += 1;

        let normal = Normal::build(&jac, &r, &grad);
        let mut accepted = false;
        let mut any_solved = false;
        while mu <= cfg.mu_max {
            let Some(step) = normal.solve(&jac, T::of(mu)) else {
                mu *= cfg.mu_increase;
                continue;
            };
            any_solved = true;
            let trial: Vec<T> = params.iter().zip(&step).map(|(&p, &d)| p + d).collect();
            net.set_params(&trial)?;
            let trial_loss = mse(&problem.residuals(&net));
            if trial_loss.is_finite() && trial_loss < loss {
                params = trial;
                loss = trial_loss;
                mu *= cfg.mu_decrease;
                accepted = true;
                break;
            }
            mu *= cfg.mu_increase;
        }
        net.set_params(&params)?;
        if !accepted {
            if !any_solved {
                return Err(Error::Training {
                    reason: format!("damped normal matrix singular up to mu = {:e}", cfg.mu_max),
                    epochs,
                });
            }
            break StopReason::DampingLimit;
        }
        loss_curve.push(loss);
        debug!("lm epoch {epochs}: mse {loss:.3e}, mu {mu:.1e}");
        if let Some(v) = &validation {
            let e = val_rmse(&net, v);
            validation_rmse.push(e);
            if e < best.2 {
                best = (epochs, params.clone(), e);
                fails = 0;
            } else {
                fails += 1;
                if fails >= cfg.max_validation_fails {
                    break StopReason::ValidationStop;
                }
            }
        }
        (jac, r) = problem.jacobian(&net);
        grad = jac.tr_mul_vec(&r);
    };

    let mut best_epoch = epochs;
    if validation.is_some() && best.0 != epochs {
        best_epoch = best.0;
        params = best.1;
        net.set_params(&params)?;
        r = problem.residuals(&net);
        loss = mse(&r);
        grad = problem.jacobian(&net).0.tr_mul_vec(&r);
    }

    if !net.all_finite() {
        return Err(Error::Training {
            reason: "parameters became non-finite".into(),
            epochs,
        });
    }
    let report = TrainingReport {
        epochs,
        rmse: loss.sqrt() * target_scale,
        loss_curve,
        final_gradient_norm: grad_norm(&grad),
        final_mu: mu,
        stop_reason,
        validation_rmse,
        best_epoch,
    };
    Ok((net, report))
}
