//! Frequency-domain samples from Markov parameters, and the periodogram-ratio
//! baseline estimator.

use std::path::Path;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::dataio::{write_csv, CsvCell, Dataset};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::MarkovSequence;

/// Transfer-function samples `H(z_k)` at points on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySamples<T: Real> {
    ts: T,
    omega: Vec<T>,
    points: Vec<Complex<T>>,
    values: Vec<DMatrix<Complex<T>>>,
}

fn unit_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::default_epsilon() * T::lit(100.0))
}

impl<T: Real> FrequencySamples<T> {
    /// Samples at `z_k = e^{iω_k}` (ω in rad/sample).
    pub fn new(omega: Vec<T>, values: Vec<DMatrix<Complex<T>>>) -> Result<Self> {
        let points = omega.iter().map(|&w| Complex::new(w.cos(), w.sin())).collect();
        Self::with_points(omega, points, values)
    }

    pub fn with_points(
        omega: Vec<T>,
        points: Vec<Complex<T>>,
        values: Vec<DMatrix<Complex<T>>>,
    ) -> Result<Self> {
        if omega.len() != points.len() || points.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies, {} points, {} values",
                omega.len(),
                points.len(),
                values.len()
            )));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.shape() != first.shape()) {
                return Err(Error::Dimension("response blocks differ in shape".into()));
            }
        }
        let tol = unit_tolerance::<T>();
        if let Some(k) = points.iter().position(|z| (z.modulus() - T::one()).abs() > tol) {
            return Err(Error::InvalidArgument(format!("point {k} is off the unit circle")));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if (points[i] - points[j]).modulus() <= T::lit(1e-14) {
                    return Err(Error::PointCollision { i, j });
                }
            }
        }
        Ok(Self {
            ts: T::one(),
            omega,
            points,
            values,
        })
    }

    /// Attaches the sample period (seconds) of the underlying discrete system.
    pub fn with_ts(mut self, ts: T) -> Self {
        self.ts = ts;
        self
    }

    /// Sample period; 1 unless set.
    pub fn ts(&self) -> T {
        self.ts
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn values(&self) -> &[DMatrix<Complex<T>>] {
        &self.values
    }

    /// Output/input block shape, `(0, 0)` when empty.
    pub fn shape(&self) -> (usize, usize) {
        self.values.first().map(|v| v.shape()).unwrap_or((0, 0))
    }

    /// Samples at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            ts: self.ts,
            omega: indices.iter().map(|&i| self.omega[i]).collect(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            values: indices.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

/// `H̃(e^{iω_i}) = Σ_{k<N} h_k e^{-iω_i k}` on `ω_i = 2πi/N`, i = 0..N-1.
pub fn markov_to_frequency<T>(h: &MarkovSequence<T>) -> Result<FrequencySamples<T>>
where
    T: Real + FftNum,
{
    let n = h.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two Markov parameters".into()));
    }
    let (ny, nu) = (h.ny(), h.nu());
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut values = vec![DMatrix::<Complex<T>>::zeros(ny, nu); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for i in 0..ny {
        for j in 0..nu {
            for (k, slot) in buf.iter_mut().enumerate() {
                *slot = Complex::new(h.block(k)[(i, j)], T::zero());
            }
            fft.process(&mut buf);
            for (v, x) in values.iter_mut().zip(&buf) {
                v[(i, j)] = *x;
            }
        }
    }
    let two_pi = T::two_pi();
    let nn = T::from_usize_lossy(n);
    let omega = (0..n).map(|i| two_pi * T::from_usize_lossy(i) / nn).collect();
    Ok(FrequencySamples::new(omega, values)?.with_ts(h.ts()))
}

/// Inverse of [`markov_to_frequency`]: real parts of the inverse DFT.
pub fn frequency_to_markov<T>(samples: &FrequencySamples<T>, ts: T) -> Result<MarkovSequence<T>>
where
    T: Real + FftNum,
{
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let (ny, nu) = samples.shape();
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(n);
    let mut blocks = vec![DMatrix::<T>::zeros(ny, nu); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    let nn = T::from_usize_lossy(n);
    for i in 0..ny {
        for j in 0..nu {
            for (slot, v) in buf.iter_mut().zip(samples.values()) {
                *slot = v[(i, j)];
            }
            ifft.process(&mut buf);
            for (b, x) in blocks.iter_mut().zip(&buf) {
                b[(i, j)] = x.re / nn;
            }
        }
    }
    MarkovSequence::new(blocks, ts)
}

/// Relative floor below which the input auto-spectrum counts as zero.
pub const SPECTRAL_FLOOR: f64 = 1e-14;

/// Periodogram ratio `S_yu(ω_i) / S_uu(ω_i)` on the `n`-point grid `ω_i = 2πi/n`.
/// SISO only; no windowing or averaging.
pub fn estimate_frf_spectral<T: Real>(ds: &Dataset<T>, n: usize) -> Result<FrequencySamples<T>> {
    if ds.nu() != 1 || ds.ny() != 1 {
        return Err(Error::MethodUnsupported(
            "spectral-ratio estimate (single-input single-output only)".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    let ns = ds.len();
    let u = ds.u.data();
    let y = ds.y.data();
    let two_pi = T::two_pi();
    let nn = T::from_usize_lossy(n);
    let scale = T::from_usize_lossy(ns);
    let mut omega = Vec::with_capacity(n);
    let mut syu = Vec::with_capacity(n);
    let mut suu = Vec::with_capacity(n);
    for i in 0..n {
        let w = two_pi * T::from_usize_lossy(i) / nn;
        let mut uf = Complex::new(T::zero(), T::zero());
        let mut yf = Complex::new(T::zero(), T::zero());
        for k in 0..ns {
            // Reduce the phase index modulo n to keep the angle small.
            let phase = two_pi * T::from_usize_lossy((i * k) % n) / nn;
            let e = Complex::new(phase.cos(), -phase.sin());
            uf += e * u[(0, k)];
            yf += e * y[(0, k)];
        }
        omega.push(w);
        syu.push(yf * uf.conj() / scale);
        suu.push((uf.re * uf.re + uf.im * uf.im) / scale);
    }
    let peak = suu.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = T::lit(SPECTRAL_FLOOR) * peak;
    let mut values = Vec::with_capacity(n);
    for (bin, (s_yu, s_uu)) in syu.iter().zip(&suu).enumerate() {
        if !(*s_uu > floor) {
            return Err(Error::SpectralDivision { bin });
        }
        values.push(DMatrix::from_element(1, 1, *s_yu / *s_uu));
    }
    Ok(FrequencySamples::new(omega, values)?.with_ts(ds.ts()))
}

/// CSV with columns `omega, re(H_i_j), im(H_i_j), …`. `omega` is in the
/// samples' own unit.
pub fn write_frequency_csv(path: &Path, samples: &FrequencySamples<f64>) -> Result<()> {
    let (ny, nu) = samples.shape();
    let mut header = vec!["omega".to_string()];
    for i in 1..=ny {
        for j in 1..=nu {
            header.push(format!("re(H_{i}_{j})"));
            header.push(format!("im(H_{i}_{j})"));
        }
    }
    let rows: Vec<Vec<CsvCell>> = samples
        .omega()
        .iter()
        .zip(samples.values())
        .map(|(w, v)| {
            let mut row = vec![CsvCell::from(*w)];
            for i in 0..ny {
                for j in 0..nu {
                    row.push(v[(i, j)].re.into());
                    row.push(v[(i, j)].im.into());
                }
            }
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}
