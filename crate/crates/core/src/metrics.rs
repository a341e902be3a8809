//! Error and fit measures for estimated impulse and frequency responses.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lti::DescriptorModel;
use crate::scalar::{Entry, Real};
use crate::signal::MarkovSequence;
use crate::spectral::FrequencySamples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Metric {
    /// Impulse-response fit, percent.
    #[serde(rename = "W")]
    Fit,
    /// Normalized frequency-response error.
    #[serde(rename = "W_H")]
    FreqError,
    /// Normalized impulse-response error.
    #[serde(rename = "W_h")]
    ImpulseError,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Fit => "W",
            Metric::FreqError => "W_H",
            Metric::ImpulseError => "W_h",
        }
    }
}

fn check_same_shape<T: Real>(a: &MarkovSequence<T>, b: &MarkovSequence<T>) -> Result<()> {
    if a.len() != b.len() || a.ny() != b.ny() || a.nu() != b.nu() {
        return Err(Error::Dimension(format!(
            "sequences differ: {} blocks of {}x{} vs {} blocks of {}x{}",
            a.len(),
            a.ny(),
            a.nu(),
            b.len(),
            b.ny(),
            b.nu()
        )));
    }
    Ok(())
}

/// `W = 100 (1 − sqrt(Σ(h − ĥ)² / Σ(h − h̄)²))`, with `h̄` the mean of each
/// true entry sequence and sums running over every block entry.
pub fn fit_percentage<T: Real>(h_hat: &MarkovSequence<T>, h_true: &MarkovSequence<T>) -> Result<T> {
    check_same_shape(h_hat, h_true)?;
    let count = T::from_usize_lossy(h_true.len());
    let mean: DMatrix<T> = h_true
        .blocks()
        .iter()
        .fold(DMatrix::zeros(h_true.ny(), h_true.nu()), |acc, b| acc + b)
        / count;
    let mut num = T::zero();
    let mut den = T::zero();
    for (est, truth) in h_hat.blocks().iter().zip(h_true.blocks()) {
        num += (truth - est).norm_squared();
        den += (truth - &mean).norm_squared();
    }
    if den <= T::zero() {
        return Err(Error::DegenerateReference);
    }
    Ok(T::lit(100.0) * (T::one() - (num / den).sqrt()))
}

/// `W_H = sqrt(Σ‖Ĥ − H‖_F² / Σ‖H‖_F²)` over a shared grid.
pub fn h2_freq_error<T: Real>(h_hat: &FrequencySamples<T>, h_true: &FrequencySamples<T>) -> Result<T> {
    if h_hat.len() != h_true.len() || h_hat.shape() != h_true.shape() {
        return Err(Error::Dimension("frequency samples differ in size".into()));
    }
    let tol = T::lit(1e-12);
    if h_hat
        .points()
        .iter()
        .zip(h_true.points())
        .any(|(a, b)| (a - b).modulus() > tol)
    {
        return Err(Error::InvalidArgument("frequency grids differ".into()));
    }
    freq_error_values(h_hat.values(), h_true.values())
}

pub(crate) fn freq_error_values<T: Real>(
    h_hat: &[DMatrix<Complex<T>>],
    h_true: &[DMatrix<Complex<T>>],
) -> Result<T> {
    let mut num = T::zero();
    let mut den = T::zero();
    for (est, truth) in h_hat.iter().zip(h_true) {
        num += (truth - est).norm_squared();
        den += truth.norm_squared();
    }
    if den <= T::zero() {
        return Err(Error::DegenerateReference);
    }
    Ok((num / den).sqrt())
}

/// `W_h = sqrt(‖ĥ − h‖² / ‖h‖²)`.
pub fn h2_impulse_error<T: Real>(h_hat: &MarkovSequence<T>, h_true: &MarkovSequence<T>) -> Result<T> {
    check_same_shape(h_hat, h_true)?;
    let den = h_true.energy();
    if den <= T::zero() {
        return Err(Error::DegenerateReference);
    }
    let num = h_hat
        .blocks()
        .iter()
        .zip(h_true.blocks())
        .fold(T::zero(), |acc, (a, b)| acc + (a - b).norm_squared());
    Ok((num / den).sqrt())
}

/// Log-spaced evaluation frequencies (rad/s) and their unit-circle points.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid<T: Real> {
    pub omega: Vec<T>,
    pub points: Vec<Complex<T>>,
    pub ts: T,
}

/// `count` frequencies log-spaced in `[w_min, w_max]` rad/s, mapped to `e^{iωT_s}`.
pub fn eval_grid_logspace<T: Real>(w_min: T, w_max: T, count: usize, ts: T) -> Result<EvalGrid<T>> {
    if !(w_min > T::zero() && w_min < w_max) {
        return Err(Error::Grid(format!(
            "need 0 < w_min < w_max, got [{w_min}, {w_max}]"
        )));
    }
    if !(ts > T::zero()) {
        return Err(Error::Grid("sample period must be positive".into()));
    }
    if !(w_max * ts < T::pi()) {
        return Err(Error::Grid(format!(
            "w_max = {w_max} rad/s is at or beyond the Nyquist frequency {}",
            T::pi() / ts
        )));
    }
    if count == 0 {
        return Err(Error::Grid("count must be positive".into()));
    }
    let (lo, hi) = (w_min.log10(), w_max.log10());
    let omega: Vec<T> = (0..count)
        .map(|k| {
            if count == 1 {
                w_min
            } else if k == count - 1 {
                w_max
            } else {
                let t = T::from_usize_lossy(k) / T::from_usize_lossy(count - 1);
                T::lit(10.0).powf(lo + (hi - lo) * t)
            }
        })
        .collect();
    let points = omega
        .iter()
        .map(|&w| {
            let phase = w * ts;
            Complex::new(phase.cos(), phase.sin())
        })
        .collect();
    Ok(EvalGrid { omega, points, ts })
}

impl<T: Real> EvalGrid<T> {
    /// Realified model response on the grid (ω stored in rad/sample).
    pub fn evaluate<S: Entry<RealField = T>>(&self, model: &DescriptorModel<S>) -> Result<FrequencySamples<T>> {
        let values = model.realified_frequency_response(&self.points)?.value;
        let omega = self.omega.iter().map(|&w| w * self.ts).collect();
        Ok(FrequencySamples::with_points(omega, self.points.clone(), values)?.with_ts(self.ts))
    }
}
