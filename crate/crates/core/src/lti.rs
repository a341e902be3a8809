//! Discrete-time (and, for ingestion, continuous-time) LTI descriptor models.

use nalgebra::{ComplexField, DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Entry, Real};
use crate::signal::{MarkovSequence, SignalSequence};

/// Largest accepted condition number of the descriptor matrix E.
pub const MAX_E_CONDITION: f64 = 1e12;

/// Imaginary residue (relative to the response norm) above which a complex
/// model's realified response is reported as suspect.
pub const IMAG_WARN_RATIO: f64 = 1e-6;

/// Time axis of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling<R> {
    Discrete { ts: R },
    Continuous,
}

impl<R: Copy> Sampling<R> {
    pub fn ts(&self) -> Option<R> {
        match self {
            Sampling::Discrete { ts } => Some(*ts),
            Sampling::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Sampling::Discrete { .. })
    }
}

/// `E x' = A x + B u`, `y = C x + D u`. `E` absent means identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorModel<S: Entry> {
    e: Option<DMatrix<S>>,
    a: DMatrix<S>,
    b: DMatrix<S>,
    c: DMatrix<S>,
    d: DMatrix<S>,
    sampling: Sampling<S::RealField>,
}

/// A real-valued response extracted from possibly complex arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Realified<V, R> {
    pub value: V,
    /// Largest imaginary magnitude that was discarded.
    pub max_imag: R,
    /// 2-norm of the retained values.
    pub norm: R,
}

impl<V, R: Real> Realified<V, R> {
    pub fn imag_ratio(&self) -> R {
        if self.norm > R::zero() {
            self.max_imag / self.norm
        } else {
            self.max_imag
        }
    }

    pub fn is_suspect(&self) -> bool {
        self.imag_ratio() > R::lit(IMAG_WARN_RATIO)
    }

    fn warn_if_suspect(self, what: &str) -> V {
        if self.is_suspect() {
            log::warn!(
                "{what}: discarded imaginary part {:.3e} exceeds {IMAG_WARN_RATIO:e} of response norm {:.3e}",
                self.max_imag.to_f64_lossy(),
                self.norm.to_f64_lossy()
            );
        }
        self.value
    }
}

/// Spectral radius (discrete) or spectral abscissa (continuous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability<R> {
    pub stable: bool,
    pub radius_or_abscissa: R,
}

impl<S: Entry> DescriptorModel<S> {
    /// Checks dimensions. `d` absent means zero feedthrough.
    pub fn new(
        e: Option<DMatrix<S>>,
        a: DMatrix<S>,
        b: DMatrix<S>,
        c: DMatrix<S>,
        d: Option<DMatrix<S>>,
        sampling: Sampling<S::RealField>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, not square", n, a.ncols())));
        }
        if let Some(e) = &e {
            if e.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "E is {:?}, expected {n}x{n}",
                    e.shape()
                )));
            }
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, expected {n}", c.ncols())));
        }
        let (ny, nu) = (c.nrows(), b.ncols());
        if ny == 0 || nu == 0 {
            return Err(Error::Dimension("model needs at least one input and one output".into()));
        }
        let d = d.unwrap_or_else(|| DMatrix::zeros(ny, nu));
        if d.shape() != (ny, nu) {
            return Err(Error::Dimension(format!(
                "D is {:?}, expected {ny}x{nu}",
                d.shape()
            )));
        }
        if let Sampling::Discrete { ts } = sampling {
            if !(ts > S::RealField::zero()) {
                return Err(Error::InvalidArgument("sample period must be positive".into()));
            }
        }
        Ok(Self { e, a, b, c, d, sampling })
    }

    /// Standard-form discrete model.
    pub fn discrete(
        a: DMatrix<S>,
        b: DMatrix<S>,
        c: DMatrix<S>,
        d: Option<DMatrix<S>>,
        ts: S::RealField,
    ) -> Result<Self> {
        Self::new(None, a, b, c, d, Sampling::Discrete { ts })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    pub fn e(&self) -> Option<&DMatrix<S>> {
        self.e.as_ref()
    }

    pub fn a(&self) -> &DMatrix<S> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<S> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<S> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<S> {
        &self.d
    }

    pub fn sampling(&self) -> Sampling<S::RealField> {
        self.sampling
    }

    pub fn is_standard(&self) -> bool {
        self.e.is_none()
    }

    fn require_discrete(&self) -> Result<()> {
        if self.sampling.is_discrete() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "operation requires a discrete-time model".into(),
            ))
        }
    }

    /// (E⁻¹A, E⁻¹B) from a single LU factorization of E.
    fn standard_parts(&self) -> Result<(DMatrix<S>, DMatrix<S>)> {
        let Some(e) = &self.e else {
            return Ok((self.a.clone(), self.b.clone()));
        };
        let n = self.n();
        if n == 0 {
            return Ok((self.a.clone(), self.b.clone()));
        }
        let sv = e.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > S::RealField::zero() {
            (smax / smin).to_f64_lossy()
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_E_CONDITION) {
            return Err(Error::SingularE { condition });
        }
        let lu = e.clone().lu();
        let a = lu.solve(&self.a).ok_or(Error::SingularE { condition })?;
        let b = lu.solve(&self.b).ok_or(Error::SingularE { condition })?;
        Ok((a, b))
    }

    /// Equivalent model with E = I.
    pub fn to_standard(&self) -> Result<Self> {
        let (a, b) = self.standard_parts()?;
        Ok(Self {
            e: None,
            a,
            b,
            c: self.c.clone(),
            d: self.d.clone(),
            sampling: self.sampling,
        })
    }

    /// Same model with the sample period replaced.
    pub fn with_sampling(mut self, sampling: Sampling<S::RealField>) -> Self {
        self.sampling = sampling;
        self
    }

    /// Output response with complex-arithmetic diagnostics.
    pub fn simulate_detailed(
        &self,
        input: &SignalSequence<S::RealField>,
        x0: Option<&DVector<S>>,
    ) -> Result<Realified<SignalSequence<S::RealField>, S::RealField>> {
        self.require_discrete()?;
        if input.channels() != self.nu() {
            return Err(Error::Dimension(format!(
                "input has {} channels, model has {} inputs",
                input.channels(),
                self.nu()
            )));
        }
        let n = self.n();
        if let Some(x0) = x0 {
            if x0.len() != n {
                return Err(Error::Dimension(format!(
                    "initial state has length {}, expected {n}",
                    x0.len()
                )));
            }
        }
        let (a, b) = self.standard_parts()?;
        let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
        let k = input.len();
        let mut out = DMatrix::<S::RealField>::zeros(self.ny(), k);
        let mut max_imag = S::RealField::zero();
        for t in 0..k {
            let u: DVector<S> = input.sample(t).map(S::from_real);
            let y = &self.c * &x + &self.d * &u;
            for (i, v) in y.iter().enumerate() {
                out[(i, t)] = v.real();
                max_imag = max_imag.max(v.imaginary().abs());
            }
            x = &a * &x + &b * &u;
        }
        let norm = out.norm();
        Ok(Realified {
            value: SignalSequence::new(out, input.ts())?,
            max_imag,
            norm,
        })
    }

    /// Simulates `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k` from `x0` (zero if absent).
    pub fn simulate(
        &self,
        input: &SignalSequence<S::RealField>,
        x0: Option<&DVector<S>>,
    ) -> Result<SignalSequence<S::RealField>> {
        Ok(self.simulate_detailed(input, x0)?.warn_if_suspect("simulate"))
    }

    /// Markov parameters with complex-arithmetic diagnostics.
    pub fn impulse_response_detailed(
        &self,
        count: usize,
    ) -> Result<Realified<MarkovSequence<S::RealField>, S::RealField>> {
        self.require_discrete()?;
        if count == 0 {
            return Err(Error::InvalidArgument("impulse response length must be >= 1".into()));
        }
        let (a, b) = self.standard_parts()?;
        let mut max_imag = S::RealField::zero();
        let mut realify = |m: &DMatrix<S>| {
            for v in m.iter() {
                max_imag = max_imag.max(v.imaginary().abs());
            }
            m.map(|v| v.real())
        };
        let mut blocks = Vec::with_capacity(count);
        blocks.push(realify(&self.d));
        let mut power_b = b;
        for _ in 1..count {
            blocks.push(realify(&(&self.c * &power_b)));
            power_b = &a * &power_b;
        }
        let ts = self.sampling.ts().unwrap_or_else(S::RealField::one);
        let seq = MarkovSequence::new(blocks, ts)?;
        let norm = seq.energy().sqrt();
        Ok(Realified {
            value: seq,
            max_imag,
            norm,
        })
    }

    /// `[D, CB, CAB, …]`, `count` blocks.
    pub fn impulse_response(&self, count: usize) -> Result<MarkovSequence<S::RealField>> {
        Ok(self
            .impulse_response_detailed(count)?
            .warn_if_suspect("impulse_response"))
    }

    /// `H(z) = D + C (zE - A)⁻¹ B` evaluated in complex arithmetic.
    pub fn frequency_response(
        &self,
        points: &[Complex<S::RealField>],
    ) -> Result<Vec<DMatrix<Complex<S::RealField>>>> {
        let to_c = |m: &DMatrix<S>| m.map(|v| v.into_complex());
        let (a, b, c, d) = (to_c(&self.a), to_c(&self.b), to_c(&self.c), to_c(&self.d));
        let e = self.e.as_ref().map(to_c);
        let n = self.n();
        points
            .iter()
            .map(|&z| {
                if n == 0 {
                    return Ok(d.clone());
                }
                let pencil = match &e {
                    Some(e) => e * z - &a,
                    None => DMatrix::from_diagonal_element(n, n, z) - &a,
                };
                let hit = || Error::PoleHit {
                    re: z.re.to_f64_lossy(),
                    im: z.im.to_f64_lossy(),
                };
                let x = pencil.lu().solve(&b).ok_or_else(hit)?;
                let h = &d + &c * x;
                if h.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                    Ok(h)
                } else {
                    Err(hit())
                }
            })
            .collect()
    }

    /// Frequency response of the real part of the model's impulse response,
    /// `(H(z) + conj(H(conj z))) / 2`. Identical to [`Self::frequency_response`]
    /// for real-entry models.
    pub fn realified_frequency_response(
        &self,
        points: &[Complex<S::RealField>],
    ) -> Result<Realified<Vec<DMatrix<Complex<S::RealField>>>, S::RealField>> {
        let direct = self.frequency_response(points)?;
        if !S::IS_COMPLEX {
            let norm = direct.iter().map(|m| m.norm_squared()).fold(S::RealField::zero(), |a, b| a + b).sqrt();
            return Ok(Realified {
                value: direct,
                max_imag: S::RealField::zero(),
                norm,
            });
        }
        let mirrored: Vec<_> = points.iter().map(|z| z.conj()).collect();
        let mirror = self.frequency_response(&mirrored)?;
        let half = S::RealField::lit(0.5);
        let mut max_imag = S::RealField::zero();
        let mut norm2 = S::RealField::zero();
        let value = direct
            .iter()
            .zip(&mirror)
            .map(|(h, hm)| {
                let hm = hm.map(|v| v.conj());
                let sym = (h + &hm).map(|v| v * half);
                let anti = (h - &hm).map(|v| v * half);
                for v in anti.iter() {
                    max_imag = max_imag.max(v.modulus());
                }
                norm2 += sym.norm_squared();
                sym
            })
            .collect();
        Ok(Realified {
            value,
            max_imag,
            norm: norm2.sqrt(),
        })
    }

    /// Eigenvalues of E⁻¹A.
    pub fn poles(&self) -> Result<Vec<Complex<S::RealField>>> {
        let (a, _) = self.standard_parts()?;
        let n = a.nrows();
        if n == 0 {
            return Ok(Vec::new());
        }
        if !S::IS_COMPLEX {
            let re = a.map(|v| v.real());
            return Ok(re.complex_eigenvalues().iter().copied().collect());
        }
        // [[Re, -Im], [Im, Re]] carries the spectrum of A together with its conjugate.
        let mut embed = DMatrix::<S::RealField>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                embed[(i, j)] = v.real();
                embed[(i + n, j + n)] = v.real();
                embed[(i, j + n)] = -v.imaginary();
                embed[(i + n, j)] = v.imaginary();
            }
        }
        Ok(embed.complex_eigenvalues().iter().copied().collect())
    }

    /// Discrete: all |λ| < 1. Continuous: all Re λ < 0.
    pub fn is_stable(&self) -> Result<Stability<S::RealField>> {
        let poles = self.poles()?;
        Ok(match self.sampling {
            Sampling::Discrete { .. } => {
                let radius = poles
                    .iter()
                    .map(|p| p.modulus())
                    .fold(S::RealField::zero(), |a, b| a.max(b));
                Stability {
                    stable: radius < S::RealField::one(),
                    radius_or_abscissa: radius,
                }
            }
            Sampling::Continuous => {
                let abscissa = poles
                    .iter()
                    .map(|p| p.re)
                    .fold(S::RealField::min_value().unwrap_or_else(S::RealField::zero), |a, b| a.max(b));
                Stability {
                    stable: poles.iter().all(|p| p.re < S::RealField::zero()),
                    radius_or_abscissa: abscissa,
                }
            }
        })
    }

    /// Zero-order-hold discretization of a continuous-time model.
    ///
    /// Uses `exp([[A, B], [0, 0]] ts) = [[A_d, B_d], [0, I]]`.
    pub fn discretize_zoh(&self, ts: S::RealField) -> Result<Self> {
        if self.sampling.is_discrete() {
            return Err(Error::InvalidArgument("model is already discrete-time".into()));
        }
        if !(ts > S::RealField::zero()) {
            return Err(Error::InvalidArgument("sample period must be positive".into()));
        }
        let (a, b) = self.standard_parts()?;
        let (n, nu) = (self.n(), self.nu());
        let mut aug = DMatrix::<S>::zeros(n + nu, n + nu);
        aug.view_mut((0, 0), (n, n)).copy_from(&a);
        aug.view_mut((0, n), (n, nu)).copy_from(&b);
        let phi = (aug * S::from_real(ts)).exp();
        Ok(Self {
            e: None,
            a: phi.view((0, 0), (n, n)).into_owned(),
            b: phi.view((0, n), (n, nu)).into_owned(),
            c: self.c.clone(),
            d: self.d.clone(),
            sampling: Sampling::Discrete { ts },
        })
    }
}

impl<T: Real> DescriptorModel<T> {
    /// Complex-entry copy of a real model.
    pub fn to_complex(&self) -> DescriptorModel<Complex<T>> {
        let c = |m: &DMatrix<T>| m.map(|v| Complex::new(v, T::zero()));
        DescriptorModel {
            e: self.e.as_ref().map(c),
            a: c(&self.a),
            b: c(&self.b),
            c: c(&self.c),
            d: c(&self.d),
            sampling: self.sampling,
        }
    }
}

/// Free-function form of [`DescriptorModel::simulate`].
pub fn simulate<S: Entry>(
    model: &DescriptorModel<S>,
    input: &SignalSequence<S::RealField>,
    x0: Option<&DVector<S>>,
) -> Result<SignalSequence<S::RealField>> {
    model.simulate(input, x0)
}

pub fn impulse_response<S: Entry>(
    model: &DescriptorModel<S>,
    count: usize,
) -> Result<MarkovSequence<S::RealField>> {
    model.impulse_response(count)
}

pub fn frequency_response<S: Entry>(
    model: &DescriptorModel<S>,
    points: &[Complex<S::RealField>],
) -> Result<Vec<DMatrix<Complex<S::RealField>>>> {
    model.frequency_response(points)
}

pub fn descriptor_to_standard<S: Entry>(model: &DescriptorModel<S>) -> Result<DescriptorModel<S>> {
    model.to_standard()
}

pub fn discretize_zoh<S: Entry>(
    model: &DescriptorModel<S>,
    ts: S::RealField,
) -> Result<DescriptorModel<S>> {
    model.discretize_zoh(ts)
}

pub fn is_stable<S: Entry>(model: &DescriptorModel<S>) -> Result<Stability<S::RealField>> {
    model.is_stable()
}
