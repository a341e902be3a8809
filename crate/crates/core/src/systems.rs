//! Synthetic test systems: random stable models and a 48th-order
//! lightly damped structural surrogate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::lti::{DescriptorModel, Sampling};

/// Random real discrete-time model of the given order with every pole of
/// modulus in `[0.2, max_radius]`.
///
/// Poles come in conjugate pairs (plus one real pole for odd orders) and are
/// mixed by a random well-conditioned similarity transform.
pub fn random_stable(
    order: usize,
    nu: usize,
    ny: usize,
    max_radius: f64,
    with_feedthrough: bool,
    seed: u64,
) -> Result<DescriptorModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modal = DMatrix::<f64>::zeros(order, order);
    let mut k = 0;
    while k + 1 < order {
        let r = rng.random_range(0.2..max_radius);
        let theta = rng.random_range(0.15..std::f64::consts::PI - 0.15);
        let (re, im) = (r * theta.cos(), r * theta.sin());
        modal[(k, k)] = re;
        modal[(k + 1, k + 1)] = re;
        modal[(k, k + 1)] = -im;
        modal[(k + 1, k)] = im;
        k += 2;
    }
    if k < order {
        let r = rng.random_range(0.2..max_radius);
        modal[(k, k)] = if rng.random_bool(0.5) { r } else { -r };
    }
    let mut gauss = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let t = DMatrix::<f64>::identity(order, order) * 2.0 + gauss(order, order) * (0.5 / (order as f64).sqrt());
    let t_inv = t.clone().try_inverse().expect("diagonally dominant transform is invertible");
    let a = &t * modal * t_inv;
    let b = gauss(order, nu);
    let c = gauss(ny, order);
    let d = if with_feedthrough { Some(gauss(ny, nu)) } else { None };
    DescriptorModel::discrete(a, b, c, d, 1.0)
}

/// Parameters of the structural surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateSpec {
    pub pairs: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub damping: f64,
    /// Peak gain of the continuous frequency response over `[1, 100]` rad/s.
    pub peak_gain: f64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        Self {
            pairs: 24,
            w_min: 5.0,
            w_max: 70.0,
            damping: 0.03,
            peak_gain: 1.6e-2,
        }
    }
}

/// Continuous-time surrogate `H(s) = g Σ_k [c_k/(s − p_k) + conj]`, with
/// `p_k = ω_k(−ζ + i sqrt(1 − ζ²))`, `ω_k` log-spaced, `|c_k| = 1`, and `g`
/// chosen to hit the requested peak gain.
pub fn structural_surrogate(spec: &SurrogateSpec) -> Result<DescriptorModel<f64>> {
    let n = 2 * spec.pairs;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, 1);
    let mut c = DMatrix::<f64>::zeros(1, n);
    let ratio = (spec.w_max / spec.w_min).ln();
    for k in 0..spec.pairs {
        let t = if spec.pairs > 1 { k as f64 / (spec.pairs - 1) as f64 } else { 0.0 };
        let w = spec.w_min * (ratio * t).exp();
        let sigma = -spec.damping * w;
        let wd = w * (1.0 - spec.damping * spec.damping).sqrt();
        // Residue −i: the pair contributes 2 wd / ((s − σ)² + wd²).
        let i = 2 * k;
        a[(i, i)] = sigma;
        a[(i + 1, i + 1)] = sigma;
        a[(i, i + 1)] = wd;
        a[(i + 1, i)] = -wd;
        b[(i + 1, 0)] = 1.0;
        c[(0, i)] = 2.0;
    }
    let unscaled = DescriptorModel::new(None, a, b.clone(), c.clone(), None, Sampling::Continuous)?;
    let peak = continuous_peak_gain(&unscaled, 1.0, 100.0, 4000)?;
    let g = (spec.peak_gain / peak).sqrt();
    DescriptorModel::new(
        None,
        unscaled.a().clone(),
        b * g,
        c * g,
        None,
        Sampling::Continuous,
    )
}

/// Largest |H(iω)| over a log-spaced grid.
pub fn continuous_peak_gain(model: &DescriptorModel<f64>, w_min: f64, w_max: f64, count: usize) -> Result<f64> {
    let pts: Vec<Complex64> = (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            Complex64::new(0.0, w_min * (w_max / w_min).powf(t))
        })
        .collect();
    Ok(model
        .frequency_response(&pts)?
        .iter()
        .map(|h| h.norm())
        .fold(0.0, f64::max))
}

/// Default surrogate discretized with zero-order hold at `ts` seconds.
pub fn building_surrogate(ts: f64) -> Result<DescriptorModel<f64>> {
    structural_surrogate(&SurrogateSpec::default())?.discretize_zoh(ts)
}
