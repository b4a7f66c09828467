//! Sparse signals under the density-factor model, and their measurements.
//!
//! Each element is independently nonzero with probability `alpha0`. Nonzero
//! values are either standard-normal reals scaled by `sigma`, or exact
//! integers drawn uniformly from `[1, 2^62]` with a random sign. The integer
//! model keeps every sum exact (`i128` holds `d_c · 2^62` comfortably), so
//! value comparisons inside the decoders are plain equality.

use std::fmt::{Debug, Display};
use std::io::Write;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoders::{EqualityMode, EqualityPolicy};
use crate::graph::BipartiteGraph;
use crate::rng::{rng_from_seed, Rng};

/// Largest magnitude drawn in exact-integer mode.
pub const EXACT_MAX: i128 = 1 << 62;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("density factor must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("signal length must be at least 1")]
    Empty,
    #[error("signal has length {got}, graph expects {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("gaussian scale must be positive and finite, got {0}")]
    InvalidSigma(f64),
}

/// Arithmetic the decoders need from a signal value type.
pub trait Scalar:
    Copy + Debug + Display + Default + PartialEq + Add<Output = Self> + Sub<Output = Self> + AddAssign + SubAssign + Send + Sync + 'static
{
    fn zero() -> Self {
        Self::default()
    }

    fn to_f64(self) -> f64;

    /// Draws one nonzero value.
    fn sample_nonzero(rng: &mut Rng, sigma: f64) -> Self;

    fn equals(self, other: Self, policy: &EqualityPolicy) -> bool {
        match policy.mode {
            EqualityMode::Exact => self == other,
            EqualityMode::Tolerant => {
                let (a, b) = (self.to_f64(), other.to_f64());
                (a - b).abs() <= policy.abs_tol.max(policy.rel_tol * a.abs().max(b.abs()))
            }
        }
    }
}

impl Scalar for i128 {
    fn to_f64(self) -> f64 {
        self as f64
    }

    fn sample_nonzero(rng: &mut Rng, _sigma: f64) -> Self {
        let mag = rng.random_range(1..=EXACT_MAX);
        if rng.random_bool(0.5) {
            -mag
        } else {
            mag
        }
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }

    fn sample_nonzero(rng: &mut Rng, sigma: f64) -> Self {
        loop {
            let x: f64 = rng.sample(StandardNormal);
            if x != 0.0 {
                return x * sigma;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ValueModel {
    GaussianReal { sigma: f64 },
    UniformIntegerExact,
}

impl ValueModel {
    pub fn gaussian() -> Self {
        ValueModel::GaussianReal { sigma: 1.0 }
    }

    /// The equality policy that matches this value model.
    pub fn default_policy(&self) -> EqualityPolicy {
        match *self {
            ValueModel::GaussianReal { sigma } => EqualityPolicy::for_gaussian(sigma),
            ValueModel::UniformIntegerExact => EqualityPolicy::exact(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub alpha0: f64,
    pub value_model: ValueModel,
    pub seed: u64,
}

impl SignalModel {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(0.0..=1.0).contains(&self.alpha0) {
            return Err(SignalError::InvalidAlpha(self.alpha0));
        }
        if let ValueModel::GaussianReal { sigma } = self.value_model {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(SignalError::InvalidSigma(sigma));
            }
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        match self.value_model {
            ValueModel::GaussianReal { sigma } => sigma,
            ValueModel::UniformIntegerExact => 1.0,
        }
    }
}

/// A signal together with its support set.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalInstance<T> {
    values: Vec<T>,
    support: Vec<usize>,
}

impl<T: Scalar> SignalInstance<T> {
    /// Wraps explicit values; the support is recomputed from them.
    pub fn from_values(values: Vec<T>) -> Self {
        let support = values.iter().enumerate().filter(|(_, &x)| x != T::zero()).map(|(i, _)| i).collect();
        Self { values, support }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n], support: Vec::new() }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_mask(&self) -> Vec<bool> {
        self.values.iter().map(|&x| x != T::zero()).collect()
    }

    /// Writes `index,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,value")?;
        for (i, x) in self.values.iter().enumerate() {
            writeln!(out, "{i},{x}")?;
        }
        Ok(())
    }
}

/// Draws a signal of length `n`. The value type must match `model.value_model`
/// for the draws to mean what the model says; [`AnySignal`] does the dispatch.
pub fn sample_signal_as<T: Scalar>(n: usize, model: &SignalModel) -> Result<SignalInstance<T>, SignalError> {
    model.validate()?;
    if n == 0 {
        return Err(SignalError::Empty);
    }
    let mut rng = rng_from_seed(model.seed);
    let sigma = model.sigma();
    let mut values = vec![T::zero(); n];
    let mut support = Vec::new();
    for (i, x) in values.iter_mut().enumerate() {
        if rng.random_bool(model.alpha0) {
            *x = T::sample_nonzero(&mut rng, sigma);
            support.push(i);
        }
    }
    Ok(SignalInstance { values, support })
}

/// A signal in whichever value representation its model calls for.
#[derive(Debug, Clone, PartialEq)]
pub enum AnySignal {
    Real(SignalInstance<f64>),
    Exact(SignalInstance<i128>),
}

impl AnySignal {
    pub fn support(&self) -> &[usize] {
        match self {
            AnySignal::Real(s) => s.support(),
            AnySignal::Exact(s) => s.support(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnySignal::Real(s) => s.len(),
            AnySignal::Exact(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn sample_signal(n: usize, model: &SignalModel) -> Result<AnySignal, SignalError> {
    Ok(match model.value_model {
        ValueModel::GaussianReal { .. } => AnySignal::Real(sample_signal_as(n, model)?),
        ValueModel::UniformIntegerExact => AnySignal::Exact(sample_signal_as(n, model)?),
    })
}

/// Measurement vector `c[j] = Σ_{i ∈ M(c_j)} values[i]` (unit edge weights).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector<T> {
    pub c: Vec<T>,
}

impl<T: Scalar> MeasurementVector<T> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,value")?;
        for (j, x) in self.c.iter().enumerate() {
            writeln!(out, "{j},{x}")?;
        }
        Ok(())
    }
}

pub fn encode<T: Scalar>(g: &BipartiteGraph, s: &SignalInstance<T>) -> Result<MeasurementVector<T>, SignalError> {
    if s.len() != g.n() {
        return Err(SignalError::LengthMismatch { got: s.len(), expected: g.n() });
    }
    let c = (0..g.m())
        .map(|j| {
            g.vars_of(j).iter().fold(T::zero(), |mut acc, &v| {
                acc += s.values[v as usize];
                acc
            })
        })
        .collect();
    Ok(MeasurementVector { c })
}
