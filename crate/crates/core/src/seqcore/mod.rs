//! Sequence containers, decay kernels and exact causal convolution.
//!
//! Everything here is `f64` / `Complex64`. Layout is time-major `(T, B, N)`:
//! element `(t, b, n)` lives at `(t * B + b) * N + n`.

pub(crate) mod conv;
pub(crate) mod kernel;

pub use conv::{causal_convolve, naive_convolve, padded_len, Convolvable, Convolver};
pub use kernel::{build_lif_kernel, build_prf_kernel, prf_decay};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element type a [`SequenceBatch`] or [`DecayKernel`] can hold.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    fn from_real(x: f64) -> Self;
    /// Magnitude used for tolerance comparisons.
    fn modulus(self) -> f64;
    fn real(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn real(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn real(self) -> f64 {
        self.re
    }
}

/// What a sequence carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    Current,
    Potential,
    Spike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch<T = f64> {
    data: Vec<T>,
    steps: usize,
    batch: usize,
    channels: usize,
    kind: SeqKind,
}

impl<T: Scalar> SequenceBatch<T> {
    pub fn new(
        data: Vec<T>,
        steps: usize,
        batch: usize,
        channels: usize,
        kind: SeqKind,
    ) -> Result<Self> {
        if steps == 0 || batch == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "all dimensions must be >= 1, got ({steps}, {batch}, {channels})"
            )));
        }
        if data.len() != steps * batch * channels {
            return Err(Error::shape(format!(
                "data length {} does not match ({steps}, {batch}, {channels})",
                data.len()
            )));
        }
        if kind == SeqKind::Spike && data.iter().any(|&v| v != T::ZERO && v != T::from_real(1.0)) {
            return Err(Error::param("spike sequences must be binary"));
        }
        Ok(Self {
            data,
            steps,
            batch,
            channels,
            kind,
        })
    }

    pub fn zeros(steps: usize, batch: usize, channels: usize, kind: SeqKind) -> Result<Self> {
        Self::new(
            vec![T::ZERO; steps * batch * channels],
            steps,
            batch,
            channels,
            kind,
        )
    }

    /// A single-lane `(T, 1, 1)` sequence.
    pub fn from_lane(values: Vec<T>, kind: SeqKind) -> Result<Self> {
        let steps = values.len();
        Self::new(values, steps, 1, 1, kind)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.steps, self.batch, self.channels)
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, t: usize, b: usize, c: usize) -> usize {
        (t * self.batch + b) * self.channels + c
    }

    #[inline]
    pub fn get(&self, t: usize, b: usize, c: usize) -> T {
        self.data[self.index(t, b, c)]
    }

    /// Values of one `(b, c)` lane in time order.
    pub fn lane(&self, b: usize, c: usize) -> Vec<T> {
        let stride = self.batch * self.channels;
        let offset = b * self.channels + c;
        self.data[offset..]
            .iter()
            .step_by(stride)
            .copied()
            .collect()
    }

    /// The `(B, N)` slab at time `t`.
    pub fn step(&self, t: usize) -> &[T] {
        let width = self.batch * self.channels;
        &self.data[t * width..(t + 1) * width]
    }

    pub fn map<U: Scalar>(&self, kind: SeqKind, f: impl Fn(T) -> U) -> SequenceBatch<U> {
        SequenceBatch {
            data: self.data.iter().map(|&v| f(v)).collect(),
            steps: self.steps,
            batch: self.batch,
            channels: self.channels,
            kind,
        }
    }

    /// Reverse the time axis.
    pub fn reversed(&self) -> Self {
        let width = self.batch * self.channels;
        let mut data = Vec::with_capacity(self.data.len());
        for t in (0..self.steps).rev() {
            data.extend_from_slice(&self.data[t * width..(t + 1) * width]);
        }
        Self { data, ..*self }
    }

    pub(crate) fn from_parts(
        data: Vec<T>,
        steps: usize,
        batch: usize,
        channels: usize,
        kind: SeqKind,
    ) -> Self {
        debug_assert_eq!(data.len(), steps * batch * channels);
        Self {
            data,
            steps,
            batch,
            channels,
            kind,
        }
    }
}

impl SequenceBatch<f64> {
    /// Spike train gated by a per-channel amplitude: every element is 0 or `alpha[c]`.
    pub fn gated_spikes(
        data: Vec<f64>,
        steps: usize,
        batch: usize,
        channels: usize,
        alpha: &[f64],
    ) -> Result<Self> {
        if alpha.len() != channels {
            return Err(Error::shape("alpha length must equal channel count"));
        }
        let out = Self::new(data, steps, batch, channels, SeqKind::Current)?;
        for (i, &v) in out.data.iter().enumerate() {
            if v != 0.0 && v != alpha[i % channels] {
                return Err(Error::param("gated spikes must be 0 or alpha"));
            }
        }
        Ok(Self {
            kind: SeqKind::Spike,
            ..out
        })
    }
}

/// Per-channel powers of a decay factor, shape `(T, N)`, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayKernel<T = f64> {
    values: Vec<T>,
    steps: usize,
    channels: usize,
}

impl<T: Scalar> DecayKernel<T> {
    pub fn new(values: Vec<T>, steps: usize, channels: usize) -> Result<Self> {
        if steps == 0 || channels == 0 || values.len() != steps * channels {
            return Err(Error::shape(format!(
                "kernel of {} values cannot have shape ({steps}, {channels})",
                values.len()
            )));
        }
        Ok(Self {
            values,
            steps,
            channels,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> T {
        self.values[t * self.channels + c]
    }

    /// Kernel row for channel `c` in time order.
    pub fn row(&self, c: usize) -> Vec<T> {
        self.values[c..]
            .iter()
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DecayKernel<U> {
        DecayKernel {
            values: self.values.iter().map(|&v| f(v)).collect(),
            steps: self.steps,
            channels: self.channels,
        }
    }

    /// Shift every row one step later, dropping the last value. Used only to
    /// build deliberately broken kernels for negative-control tests.
    pub fn shifted_by_one(&self) -> Self {
        let mut values = vec![T::ZERO; self.values.len()];
        values[self.channels..].copy_from_slice(&self.values[..self.values.len() - self.channels]);
        Self { values, ..*self }
    }
}
