use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// `normalized = (raw - offset) / scale`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine<T> {
    pub offset: T,
    pub scale: T,
}

impl<T: Scalar> Affine<T> {
    pub fn identity() -> Self {
        Self {
            offset: T::zero(),
            scale: T::one(),
        }
    }

    /// Maps `[min, max]` of the samples onto `[-1, 1]`. A constant feature
    /// keeps unit scale so the map stays invertible.
    pub fn fit(values: impl IntoIterator<Item = T>) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if !lo.is_finite() || !hi.is_finite() {
            return Self::identity();
        }
        let two = T::one() + T::one();
        let half = (hi - lo) / two;
        Self {
            offset: lo + half,
            scale: if half > T::zero() { half } else { T::one() },
        }
    }

    #[inline]
    pub fn normalize(&self, raw: T) -> T {
        (raw - self.offset) / self.scale
    }

    #[inline]
    pub fn denormalize(&self, normalized: T) -> T {
        normalized * self.scale + self.offset
    }
}

/// Per-feature input scaling plus the output (target) scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization<T> {
    pub inputs: Vec<Affine<T>>,
    pub output: Affine<T>,
}

impl<T: Scalar> Normalization<T> {
    pub fn identity(width: usize) -> Self {
        Self {
            inputs: vec![Affine::identity(); width],
            output: Affine::identity(),
        }
    }

    pub fn input_len(&self) -> usize {
        self.inputs.len()
    }

    pub fn normalize_input(&self, raw: &[T]) -> Vec<T> {
        raw.iter()
            .zip(&self.inputs)
            .map(|(&v, a)| a.normalize(v))
            .collect()
    }

    pub fn denormalize_input(&self, normalized: &[T]) -> Vec<T> {
        normalized
            .iter()
            .zip(&self.inputs)
            .map(|(&v, a)| a.denormalize(v))
            .collect()
    }

    pub fn normalize_output(&self, raw: T) -> T {
        self.output.normalize(raw)
    }

    pub fn denormalize_output(&self, normalized: T) -> T {
        self.output.denormalize(normalized)
    }
}
