//! Reference computations used as independent oracles by the test suites.
//! Nothing here calls into the library's numeric paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonescan_core::model::{Activation, DenseLayer, MlpModel};

/// Two-class linear softmax model on `[0,1]^2`: logits `W x + b`.
pub struct Linear2d {
    pub w: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Linear2d {
    pub fn model(&self) -> MlpModel<f64> {
        let layer = DenseLayer::new(
            vec![self.w[0].to_vec(), self.w[1].to_vec()],
            self.b.to_vec(),
            Activation::Identity,
        )
        .unwrap();
        MlpModel::new(vec![layer]).unwrap()
    }

    /// Binary entropy (base 2) of the softmax output, written out directly.
    pub fn phi(&self, u: [f64; 2]) -> f64 {
        let z0 = self.w[0][0] * u[0] + self.w[0][1] * u[1] + self.b[0];
        let z1 = self.w[1][0] * u[0] + self.w[1][1] * u[1] + self.b[1];
        // p0 = sigmoid(z0 - z1)
        let p0 = 1.0 / (1.0 + (z1 - z0).exp());
        let p1 = 1.0 - p0;
        let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
        h(p0) + h(p1)
    }

    /// Midpoint-rule mean of `phi` over `B∞(x, r) ∩ [0,1]^2` on a `n × n` grid.
    pub fn quadrature(&self, x: [f64; 2], r: f64, n: usize) -> f64 {
        let lo = [(x[0] - r).max(0.0), (x[1] - r).max(0.0)];
        let hi = [(x[0] + r).min(1.0), (x[1] + r).min(1.0)];
        let (h0, h1) = ((hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            let u0 = lo[0] + (i as f64 + 0.5) * h0;
            let mut row = 0.0;
            for j in 0..n {
                row += self.phi([u0, lo[1] + (j as f64 + 0.5) * h1]);
            }
            total += row;
        }
        total / (n * n) as f64
    }
}

/// Model used by the quadrature checks: boundary is the line `x0 − x1 = 0.1`.
pub fn reference_linear() -> Linear2d {
    Linear2d {
        w: [[4.0, -4.0], [-4.0, 4.0]],
        b: [-0.2, 0.2],
    }
}

/// `sup_x |F_a(x) − F_b(x)|` by evaluating both ECDFs at every sample point.
pub fn brute_force_ks(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

/// `2 Σ (−1)^{j−1} exp(−2 j² λ²)` summed to a fixed 200 terms in extended order.
pub fn kolmogorov_series(lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in (1..=200).rev() {
        let j = j as f64;
        let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * j * j * lambda * lambda).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_p_value_reference(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    kolmogorov_series((ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d)
}

/// Central differences with step `h` of `f` around `params`.
pub fn central_differences(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor on the denominator so entries that are zero
/// up to roundoff compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Random smooth model: widths in 2..=6, tanh/sigmoid hidden layers, weights in ±1.5.
pub fn random_model(rng: &mut ChaCha8Rng, depth: usize) -> MlpModel<f64> {
    let mut dims = vec![rng.random_range(2..=6)];
    for _ in 0..depth {
        dims.push(rng.random_range(2..=6));
    }
    dims.push(rng.random_range(2..=5));
    let n = dims.len() - 1;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let act = if l + 1 == n {
                Activation::Identity
            } else if rng.random_bool(0.5) {
                Activation::Tanh
            } else {
                Activation::Sigmoid
            };
            let weights = (0..w[0] * w[1]).map(|_| rng.random_range(-1.5..1.5)).collect();
            let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            DenseLayer::from_flat(w[1], w[0], weights, bias, act).unwrap()
        })
        .collect();
    MlpModel::new(layers).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..1.0)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pearson chi-square statistic of `values` in `[lo, hi]` against `bins` equal-width bins.
pub fn chi_square_uniform(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> f64 {
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
        n += 1;
    }
    let expected = n as f64 / bins as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}
