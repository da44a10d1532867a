//! Uniform sampling in the clipped infinity-norm ball `B∞(X, r) ∩ [0,1]^d`.
//!
//! Randomness is counter-based: the sample with index `i` drawn from
//! `(seed, stream_id)` is a pure function of those three values. Internally
//! this is ChaCha8 keyed by `seed`, with `stream_id` selecting the ChaCha
//! stream and `i` fixing the word position, so any partition of the index
//! range across workers reproduces the serial sequence exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{check_domain, InputPoint};
use crate::{Error, Result, Scalar};

/// ChaCha words (u32) consumed per uniform draw.
const WORDS_PER_DRAW: u128 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        SeededStream { seed, stream_id }
    }

    /// Generator positioned at draw number `draw`.
    pub fn rng_at(&self, draw: u128) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(draw * WORDS_PER_DRAW);
        rng
    }

    /// Uniform `[0, 1)` values for draws `start..start + out.len()`.
    pub fn fill_uniform(&self, start: u128, out: &mut [f64]) {
        let mut rng = self.rng_at(start);
        for v in out {
            *v = unit_f64(rng.next_u64());
        }
    }
}

/// Top 53 bits of `bits` scaled into `[0, 1)`.
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The scan zone around a center point, with its per-component bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallRegion<T: Scalar> {
    center: Vec<T>,
    radius: T,
    lower: Vec<T>,
    upper: Vec<T>,
}

pub fn make_region<T: Scalar>(x: &[T], radius: T) -> Result<BallRegion<T>> {
    BallRegion::new(x, radius)
}

impl<T: Scalar> BallRegion<T> {
    pub fn new(x: &[T], radius: T) -> Result<Self> {
        if !radius.is_finite() || radius < T::zero() {
            return Err(Error::param(format!(
                "radius must be finite and nonnegative, got {radius}"
            )));
        }
        if x.is_empty() {
            return Err(Error::param("region center must have at least one component"));
        }
        check_domain(x)?;
        let lower = x.iter().map(|&xi| (xi - radius).max(T::zero())).collect();
        let upper = x.iter().map(|&xi| (xi + radius).min(T::one())).collect();
        Ok(BallRegion {
            center: x.to_vec(),
            radius,
            lower,
            upper,
        })
    }

    /// The whole normalized input space `[0,1]^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        let half = T::lit(0.5);
        Self::new(&vec![half; dim], T::one())
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, p: &[T]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// Writes samples `start..start + count` into `out`, row-major
    /// (`out.len()` must be `count * dim`).
    pub fn sample_into(&self, stream: &SeededStream, start: u64, out: &mut [T]) {
        let d = self.dim();
        debug_assert_eq!(out.len() % d, 0);
        let mut uniforms = vec![0.0f64; out.len()];
        stream.fill_uniform(start as u128 * d as u128, &mut uniforms);
        for (row_out, row_u) in out.chunks_exact_mut(d).zip(uniforms.chunks_exact(d)) {
            for (i, (o, &u)) in row_out.iter_mut().zip(row_u).enumerate() {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                *o = (lo + T::lit(u) * (hi - lo)).min(hi);
            }
        }
    }

    pub fn sample_point(&self, stream: &SeededStream, index: u64) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        self.sample_into(stream, index, &mut out);
        out
    }

    /// Samples with indices `start..start + count`.
    pub fn sample_range(&self, stream: &SeededStream, start: u64, count: usize) -> Vec<Vec<T>> {
        let mut flat = vec![T::zero(); count * self.dim()];
        self.sample_into(stream, start, &mut flat);
        flat.chunks_exact(self.dim()).map(<[T]>::to_vec).collect()
    }

    pub fn sample(&self, count: usize, stream: &SeededStream) -> Result<Vec<InputPoint<T>>> {
        if count == 0 {
            return Err(Error::param("sample count must be at least 1"));
        }
        self.sample_range(stream, 0, count)
            .into_iter()
            .map(InputPoint::new)
            .collect()
    }
}
