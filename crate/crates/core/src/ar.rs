//! Per-node online autoregressive predictor.
//!
//! Coefficients of `x(t) = a_1 x(t-1) + … + a_n x(t-n) [+ a_0]` are tracked
//! with a QR-decomposition RLS filter: the triangular factor `R` and the rotated
//! right-hand side `z` are scaled by `√λ` on every sample, the new regressor row
//! is annihilated against `R` with plane rotations, and the coefficients come
//! from back-substituting `R a = z`.
//!
//! Each reading is predicted from coefficients estimated through the previous
//! step; only afterwards is the reading folded into the estimate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{back_substitute, dot, Givens, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArConfig<T> {
    /// Number of lags `n`.
    pub order: usize,
    /// Exponential forgetting factor `λ` in `(0, 1]`.
    pub forgetting: T,
    /// Initial diagonal `δ` of the triangular factor.
    pub init_scale: T,
    /// Append a constant regressor for a nonzero-mean series.
    pub include_intercept: bool,
}

impl<T: Scalar> Default for ArConfig<T> {
    fn default() -> Self {
        Self {
            order: 3,
            forgetting: T::of(0.98),
            init_scale: T::of(1e-3),
            include_intercept: true,
        }
    }
}

impl<T: Scalar> ArConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::Config("AR order must be at least 1".into()));
        }
        if !(self.forgetting > T::zero() && self.forgetting <= T::one()) {
            return Err(Error::Config(format!(
                "AR forgetting factor must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !(self.init_scale > T::zero()) || !self.init_scale.is_finite() {
            return Err(Error::Config(format!(
                "AR init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }

    /// Coefficient-vector length.
    pub fn dim(&self) -> usize {
        self.order + usize::from(self.include_intercept)
    }
}

/// Outcome of one recursive update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateOutcome {
    /// The triangular factor was singular, so the coefficients were left as they were.
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArStepResult<T> {
    pub predicted: T,
    /// `measured - predicted`, signed.
    pub error: T,
    pub coefficients: Vec<T>,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArStep<T> {
    WarmingUp,
    Ready(ArStepResult<T>),
}

impl<T> ArStep<T> {
    pub fn ready(self) -> Option<ArStepResult<T>> {
        match self {
            ArStep::Ready(r) => Some(r),
            ArStep::WarmingUp => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArEstimator<T> {
    config: ArConfig<T>,
    r_factor: Matrix<T>,
    rhs: Vec<T>,
    coefficients: Vec<T>,
    /// Most recent reading first.
    history: VecDeque<T>,
    updates_seen: u64,
}

impl<T: Scalar> ArEstimator<T> {
    pub fn new(config: ArConfig<T>) -> Result<Self> {
        config.validate()?;
        let d = config.dim();
        Ok(Self {
            config,
            r_factor: Matrix::identity_scaled(d, config.init_scale),
            rhs: vec![T::zero(); d],
            coefficients: vec![T::zero(); d],
            history: VecDeque::with_capacity(config.order),
            updates_seen: 0,
        })
    }

    pub fn config(&self) -> &ArConfig<T> {
        &self.config
    }

    pub fn r_factor(&self) -> &Matrix<T> {
        &self.r_factor
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        self.history.iter().copied()
    }

    pub fn updates_seen(&self) -> u64 {
        self.updates_seen
    }

    pub fn is_warm(&self) -> bool {
        self.history.len() == self.config.order
    }

    /// Regressor built from the current history, or `None` during warm-up.
    pub fn regressor(&self) -> Option<Vec<T>> {
        if !self.is_warm() {
            return None;
        }
        let mut u: Vec<T> = self.history.iter().copied().collect();
        if self.config.include_intercept {
            u.push(T::one());
        }
        Some(u)
    }

    /// One QRD-RLS recursion with the given regressor row and target.
    pub fn update(&mut self, regressor: &[T], target: T) -> Result<UpdateOutcome> {
        let d = self.config.dim();
        if regressor.len() != d {
            return Err(Error::dim("AR regressor", d, regressor.len()));
        }
        if !target.is_finite() || regressor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("AR update"));
        }

        let root_lambda = self.config.forgetting.sqrt();
        if self.config.forgetting != T::one() {
            self.r_factor.scale(root_lambda);
            self.rhs.iter_mut().for_each(|z| *z *= root_lambda);
        }

        let mut row = regressor.to_vec();
        let mut y = target;
        for i in 0..d {
            if row[i] == T::zero() {
                continue;
            }
            let g = Givens::annihilate(self.r_factor[(i, i)], row[i]);
            self.r_factor[(i, i)] = g.r;
            row[i] = T::zero();
            for j in i + 1..d {
                let (rij, uj) = g.apply(self.r_factor[(i, j)], row[j]);
                self.r_factor[(i, j)] = rij;
                row[j] = uj;
            }
            let (zi, yi) = g.apply(self.rhs[i], y);
            self.rhs[i] = zi;
            y = yi;
        }
        self.updates_seen += 1;

        match back_substitute(&self.r_factor, &self.rhs) {
            Some(a) => {
                self.coefficients = a;
                Ok(UpdateOutcome { singular: false })
            }
            None => Ok(UpdateOutcome { singular: true }),
        }
    }

    /// Predicts the next reading from the current coefficients and history.
    pub fn predict(&self) -> Option<T> {
        let u = self.regressor()?;
        Some(dot(&self.coefficients, &u))
    }

    /// Predict, measure the signed error, then fold the reading into the estimate.
    pub fn step(&mut self, measured: T) -> Result<ArStep<T>> {
        if !measured.is_finite() {
            return Err(Error::NumericInput("AR measurement"));
        }
        let outcome = match self.regressor() {
            None => None,
            Some(u) => {
                let predicted = dot(&self.coefficients, &u);
                let error = measured - predicted;
                let upd = self.update(&u, measured)?;
                Some(ArStepResult {
                    predicted,
                    error,
                    coefficients: self.coefficients.clone(),
                    singular: upd.singular,
                })
            }
        };
        self.history.push_front(measured);
        self.history.truncate(self.config.order);
        Ok(outcome.map_or(ArStep::WarmingUp, ArStep::Ready))
    }
}

/// Evaluates `a · (history [, 1])` with `history` most recent first.
pub fn ar_predict<T: Scalar>(
    coefficients: &[T],
    history: &[T],
    include_intercept: bool,
) -> Result<T> {
    let expected = history.len() + usize::from(include_intercept);
    if coefficients.len() != expected {
        return Err(Error::dim("AR coefficients", expected, coefficients.len()));
    }
    let lagged = dot(&coefficients[..history.len()], history);
    Ok(if include_intercept {
        lagged + coefficients[history.len()]
    } else {
        lagged
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(
        order: usize,
        forgetting: f64,
        init_scale: f64,
        include_intercept: bool,
    ) -> ArConfig<f64> {
        ArConfig {
            order,
            forgetting,
            init_scale,
            include_intercept,
        }
    }

    #[test]
    fn new_estimator_has_documented_initial_state() {
        let est = ArEstimator::new(cfg(3, 0.98, 1e-3, true)).unwrap();
        assert_eq!(est.coefficients().len(), 4);
        assert_eq!(est.r_factor(), &Matrix::identity_scaled(4, 1e-3));
        assert!(est.rhs().iter().all(|&z| z == 0.0));
        assert_eq!(est.history().len(), 0);
        assert_eq!(est.updates_seen(), 0);

        let est = ArEstimator::new(cfg(1, 1.0, 1.0, false)).unwrap();
        assert_eq!(est.coefficients(), &[0.0]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(
            ArEstimator::new(cfg(0, 0.98, 1e-3, true)),
            Err(Error::Config(_))
        ));
        assert!(ArEstimator::new(cfg(2, 0.0, 1e-3, true)).is_err());
        assert!(ArEstimator::new(cfg(2, 1.01, 1e-3, true)).is_err());
        assert!(ArEstimator::new(cfg(2, 0.9, 0.0, true)).is_err());
        assert!(ArEstimator::new(cfg(2, f64::NAN, 1.0, true)).is_err());
    }

    #[test]
    fn predict_evaluates_linear_combination() {
        assert_eq!(
            ar_predict(&[0.5, 0.3, 0.2], &[10.0, 20.0, 30.0], false).unwrap(),
            17.0
        );
        assert_eq!(
            ar_predict(&[0.0; 3], &[4.0, -1.0, 9.0], false).unwrap(),
            0.0
        );
        for v in [-3.5, 0.0, 22.25] {
            assert_eq!(ar_predict(&[1.0], &[v], false).unwrap(), v);
        }
        assert_eq!(ar_predict(&[1.0, 2.0], &[3.0], true).unwrap(), 5.0);
        assert!(matches!(
            ar_predict(&[1.0, 2.0], &[3.0, 4.0], true),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn warm_up_then_predictions() {
        let mut est = ArEstimator::new(cfg(3, 0.98, 1e-3, true)).unwrap();
        for v in [22.0, 22.1, 21.9] {
            assert_eq!(est.step(v).unwrap(), ArStep::WarmingUp);
        }
        assert!(matches!(est.step(22.0).unwrap(), ArStep::Ready(_)));
    }

    #[test]
    fn constant_series_fit_is_exact() {
        let mut est = ArEstimator::new(cfg(3, 0.98, 1e-3, true)).unwrap();
        let mut last = None;
        for _ in 0..12 {
            if let ArStep::Ready(r) = est.step(22.0).unwrap() {
                last = Some(r);
            }
        }
        let r = last.unwrap();
        assert!(r.error.abs() < 1e-6, "error {}", r.error);
        assert_eq!(r.error, 22.0 - r.predicted);
    }

    #[test]
    fn constant_target_regression_fixed_point() {
        // The δ²-regularization bias is ~ target·δ²/|u|², so keep δ small here.
        let mut est = ArEstimator::new(cfg(3, 0.98, 1e-6, true)).unwrap();
        let u = [5.0, 5.0, 5.0, 1.0];
        for _ in 0..4 {
            est.update(&u, 5.0).unwrap();
        }
        let p = ar_predict(est.coefficients(), &[5.0, 5.0, 5.0], true).unwrap();
        assert!((5.0 - p).abs() < 1e-9);
    }

    #[test]
    fn single_update_matches_regularized_solution() {
        // (δ²I + r rᵀ) a = r y  ⇒  a = r y / (δ² + |r|²)
        let delta = 1e-3;
        let r = [1.5, -0.5, 2.0];
        let y = 3.0;
        let mut est = ArEstimator::new(cfg(3, 1.0, delta, false)).unwrap();
        est.update(&r, y).unwrap();
        let norm2: f64 = r.iter().map(|v| v * v).sum();
        for (a, ri) in est.coefficients().iter().zip(r) {
            let expected = ri * y / (delta * delta + norm2);
            assert!((a - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn factor_stays_triangular_with_nonnegative_diagonal() {
        let mut est = ArEstimator::new(cfg(4, 0.95, 1e-2, true)).unwrap();
        let mut x = 0.3_f64;
        for t in 0..200 {
            x = 0.7 * x + (t as f64 * 0.37).sin();
            est.step(x).unwrap();
            assert!(est.r_factor().is_upper_triangular());
            assert!((0..5).all(|i| est.r_factor()[(i, i)] >= 0.0));
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let mut est = ArEstimator::new(cfg(2, 1.0, 1.0, false)).unwrap();
        assert!(matches!(est.step(f64::NAN), Err(Error::NumericInput(_))));
        assert!(matches!(
            est.update(&[1.0, f64::INFINITY], 0.0),
            Err(Error::NumericInput(_))
        ));
        assert!(matches!(
            est.update(&[1.0], 0.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn singular_factor_freezes_coefficients() {
        // Forgetting drives an unexcited diagonal to zero in f32.
        let mut est = ArEstimator::new(ArConfig::<f32> {
            order: 2,
            forgetting: 0.5,
            init_scale: 1e-3,
            include_intercept: false,
        })
        .unwrap();
        est.update(&[1.0, 0.0], 2.0).unwrap();
        let before = est.coefficients().to_vec();
        let mut flagged = false;
        for _ in 0..400 {
            let o = est.update(&[1.0, 0.0], 2.0).unwrap();
            flagged |= o.singular;
            assert!(est.coefficients().iter().all(|v| v.is_finite()));
        }
        assert!(flagged);
        assert!((est.coefficients()[0] - before[0]).abs() < 1e-3);
    }

    #[test]
    fn f32_estimator_tracks_constant() {
        let mut est = ArEstimator::<f32>::new(ArConfig::default()).unwrap();
        let mut err = f32::MAX;
        for _ in 0..20 {
            if let ArStep::Ready(r) = est.step(22.0).unwrap() {
                err = r.error.abs();
            }
        }
        assert!(err < 1e-3);
    }
}
