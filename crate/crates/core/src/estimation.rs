//! Markov-parameter estimation from input/output records.
//!
//! Block-Hankel data matrices stack channels inside each time step: the rows
//! of a depth-`d` matrix are `[ch1(k); ch2(k); …; ch1(k+1); …]`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{MarkovSequence, SignalSequence};

/// Hyper-parameter rules and their optional overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    /// Margin on the cross-correlation threshold, in [0, 1].
    pub alpha: f64,
    /// Relative singular-value cut used by the threshold order rule.
    pub svd_threshold: f64,
    /// Relative rank tolerance; the absolute cut is this × σ_max × max(rows, cols).
    pub rank_tolerance: f64,
    pub l0: Option<usize>,
    pub n: Option<usize>,
    pub sigma2: Option<f64>,
    pub order: Option<usize>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            svd_threshold: 1e-8,
            rank_tolerance: 1e-10,
            l0: None,
            n: None,
            sigma2: None,
            order: None,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} outside [0, 1]",
                self.alpha
            )));
        }
        if !(self.svd_threshold > 0.0 && self.rank_tolerance > 0.0) {
            return Err(Error::InvalidArgument("thresholds must be positive".into()));
        }
        if self.order == Some(0) {
            return Err(Error::InvalidArgument("order must be >= 1".into()));
        }
        Ok(())
    }
}

/// Block-Hankel matrix whose block (i, j) is the sample at `start + i + j`.
pub fn block_hankel<T: Real>(
    signal: &SignalSequence<T>,
    depth: usize,
    start: usize,
    cols: usize,
) -> Result<DMatrix<T>> {
    let ch = signal.channels();
    if cols == 0 {
        return Err(Error::OutOfRange("block-Hankel matrix needs >= 1 column".into()));
    }
    if depth > 0 && start + depth + cols - 1 > signal.len() {
        return Err(Error::OutOfRange(format!(
            "window start {start}, depth {depth}, {cols} columns exceeds {} samples",
            signal.len()
        )));
    }
    let data = signal.data();
    Ok(DMatrix::from_fn(depth * ch, cols, |r, j| {
        data[(r % ch, start + r / ch + j)]
    }))
}

/// Past/future data matrices of the behavioural (Willems) representation.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralMatrices<T: Real> {
    pub up: DMatrix<T>,
    pub uf: DMatrix<T>,
    pub yp: DMatrix<T>,
    pub yf: DMatrix<T>,
    pub l0: usize,
    pub n: usize,
    pub nu: usize,
    pub ny: usize,
}

impl<T: Real> BehavioralMatrices<T> {
    /// Number of data columns M'.
    pub fn columns(&self) -> usize {
        self.uf.ncols()
    }

    /// `L' = L0 + N`.
    pub fn window(&self) -> usize {
        self.l0 + self.n
    }

    /// `U = [Up; Uf]`.
    pub fn u(&self) -> DMatrix<T> {
        stack_rows(&self.up, &self.uf)
    }

    /// Same matrices with columns reordered by `perm` (column j ← old column perm[j]).
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let m = self.columns();
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the data columns".into()));
        }
        let pick = |x: &DMatrix<T>| DMatrix::from_fn(x.nrows(), m, |i, j| x[(i, perm[j])]);
        Ok(Self {
            up: pick(&self.up),
            uf: pick(&self.uf),
            yp: pick(&self.yp),
            yf: pick(&self.yf),
            ..*self
        })
    }
}

fn stack_rows<T: Real>(top: &DMatrix<T>, bottom: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Builds Up, Uf, Yp, Yf with `M' = N_s - L0 - N + 1` columns.
pub fn build_behavioral<T: Real>(ds: &Dataset<T>, l0: usize, n: usize) -> Result<BehavioralMatrices<T>> {
    let ns = ds.len();
    if n == 0 {
        return Err(Error::OutOfRange("future window N must be >= 1".into()));
    }
    if l0 + n > ns {
        return Err(Error::OutOfRange(format!(
            "L0 + N = {} exceeds {ns} samples",
            l0 + n
        )));
    }
    let m = ns - l0 - n + 1;
    Ok(BehavioralMatrices {
        up: block_hankel(&ds.u, l0, 0, m)?,
        uf: block_hankel(&ds.u, n, l0, m)?,
        yp: block_hankel(&ds.y, l0, 0, m)?,
        yf: block_hankel(&ds.y, n, l0, m)?,
        l0,
        n,
        nu: ds.nu(),
        ny: ds.ny(),
    })
}

/// Outcome of a rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Persistency {
    pub full_row_rank: bool,
    pub numerical_rank: usize,
}

/// Numerical rank from singular values, cut at `rel_tol × σ_max × max(rows, cols)`.
pub fn numerical_rank<T: Real>(m: &DMatrix<T>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax <= T::zero() {
        return 0;
    }
    let cut = T::lit(rel_tol) * smax * T::from_usize_lossy(m.nrows().max(m.ncols()));
    sv.iter().filter(|&&s| s > cut).count()
}

pub fn check_persistency<T: Real>(u: &DMatrix<T>, rel_tol: f64) -> Persistency {
    let rank = numerical_rank(u, rel_tol);
    Persistency {
        full_row_rank: rank == u.nrows(),
        numerical_rank: rank,
    }
}

/// Least-squares estimate together with its regression residual.
#[derive(Debug, Clone)]
pub struct LsEstimate<T: Real> {
    pub markov: MarkovSequence<T>,
    /// `‖U h - Y‖²` summed over outputs.
    pub residual_norm2: T,
    pub rows: usize,
}

/// Regressor `Φ` (row t: `[u_t', u_{t-1}', …, u_{t-N+1}']`) and targets `y_t'`,
/// for t = N-1 .. N_s-1.
fn ls_regression<T: Real>(ds: &Dataset<T>, n: usize) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let ns = ds.len();
    if n == 0 || 2 * n > ns {
        return Err(Error::InvalidArgument(format!(
            "least squares needs 1 <= N < (N_s + 1)/2, got N = {n}, N_s = {ns}"
        )));
    }
    let (nu, ny) = (ds.nu(), ds.ny());
    let rows = ns - n + 1;
    let u = ds.u.data();
    let y = ds.y.data();
    let phi = DMatrix::from_fn(rows, n * nu, |r, c| {
        let t = r + n - 1;
        u[(c % nu, t - c / nu)]
    });
    let target = DMatrix::from_fn(rows, ny, |r, c| y[(c, r + n - 1)]);
    Ok((phi, target))
}

fn theta_to_markov<T: Real>(theta: &DMatrix<T>, n: usize, nu: usize, ny: usize, ts: T) -> Result<MarkovSequence<T>> {
    let blocks = (0..n)
        .map(|k| DMatrix::from_fn(ny, nu, |i, j| theta[(k * nu + j, i)]))
        .collect();
    MarkovSequence::new(blocks, ts)
}

/// Minimum-norm least-squares FIR fit of length `n`, via SVD.
pub fn estimate_markov_ls_detailed<T: Real>(
    ds: &Dataset<T>,
    n: usize,
    rank_tolerance: f64,
) -> Result<LsEstimate<T>> {
    let (phi, target) = ls_regression(ds, n)?;
    let cols = phi.ncols();
    let svd = phi.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = T::lit(rank_tolerance) * smax * T::from_usize_lossy(phi.nrows().max(cols));
    let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();
    if rank < cols {
        return Err(Error::RankDeficientRegressor { rank, cols });
    }
    let theta = svd
        .solve(&target, cut)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let residual = &phi * &theta - &target;
    Ok(LsEstimate {
        markov: theta_to_markov(&theta, n, ds.nu(), ds.ny(), ds.ts())?,
        residual_norm2: residual.norm_squared(),
        rows: phi.nrows(),
    })
}

pub fn estimate_markov_ls<T: Real>(ds: &Dataset<T>, n: usize) -> Result<MarkovSequence<T>> {
    Ok(estimate_markov_ls_detailed(ds, n, TuningConfig::default().rank_tolerance)?.markov)
}

/// `σ̂² = ‖U h_LS - Y‖² / ((N_s - N) n_y)`.
pub fn estimate_noise_variance<T: Real>(ds: &Dataset<T>, h_ls: &MarkovSequence<T>) -> Result<T> {
    let n = h_ls.len();
    let ns = ds.len();
    if n >= ns {
        return Err(Error::DegenerateDenominator(format!("N = {n} >= N_s = {ns}")));
    }
    if h_ls.nu() != ds.nu() || h_ls.ny() != ds.ny() {
        return Err(Error::Dimension("Markov blocks do not match dataset channels".into()));
    }
    let (phi, target) = ls_regression(ds, n)?;
    let nu = ds.nu();
    let theta = DMatrix::from_fn(n * nu, ds.ny(), |r, c| h_ls.block(r / nu)[(c, r % nu)]);
    let residual = phi * theta - target;
    Ok(residual.norm_squared() / T::from_usize_lossy((ns - n) * ds.ny()))
}

/// Biased cross-correlation `R_yu(τ) = (1/N_s) Σ_k y_{k+τ} u_k`, τ ∈ [-(N_s-1), N_s-1].
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelation<T: Real> {
    values: Vec<T>,
    max_lag: usize,
}

impl<T: Real> CrossCorrelation<T> {
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.len().is_multiple_of(2) {
            return Err(Error::Dimension("lag range must be symmetric".into()));
        }
        let max_lag = values.len() / 2;
        Ok(Self { values, max_lag })
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn at(&self, lag: isize) -> T {
        self.values[(lag + self.max_lag as isize) as usize]
    }

    /// Values for lags -max_lag ..= max_lag.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn lags(&self) -> impl Iterator<Item = isize> + '_ {
        let m = self.max_lag as isize;
        -m..=m
    }

    /// Arithmetic mean over realizations of equal length.
    pub fn average(items: &[Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::InvalidArgument("nothing to average".into()))?;
        if items.iter().any(|c| c.values.len() != first.values.len()) {
            return Err(Error::Dimension("cross-correlations differ in length".into()));
        }
        let count = T::from_usize_lossy(items.len());
        let values = (0..first.values.len())
            .map(|i| items.iter().fold(T::zero(), |acc, c| acc + c.values[i]) / count)
            .collect();
        Ok(Self {
            values,
            max_lag: first.max_lag,
        })
    }
}

/// For multichannel data each lag holds the largest |R| over channel pairs.
pub fn cross_correlation<T: Real>(ds: &Dataset<T>) -> CrossCorrelation<T> {
    let ns = ds.len();
    let max_lag = ns - 1;
    let scale = T::from_usize_lossy(ns);
    let siso = ds.nu() == 1 && ds.ny() == 1;
    let mut values = vec![T::zero(); 2 * max_lag + 1];
    for yc in 0..ds.ny() {
        let y = ds.y.data().row(yc);
        for uc in 0..ds.nu() {
            let u = ds.u.data().row(uc);
            for (slot, tau) in (-(max_lag as isize)..=max_lag as isize).enumerate() {
                let (k0, k1) = if tau >= 0 {
                    (0, ns - tau as usize)
                } else {
                    ((-tau) as usize, ns)
                };
                let mut acc = T::zero();
                for k in k0..k1 {
                    acc += y[(k as isize + tau) as usize] * u[k];
                }
                let r = acc / scale;
                values[slot] = if siso { r } else { values[slot].max(r.abs()) };
            }
        }
    }
    CrossCorrelation { values, max_lag }
}

/// Chosen past-window length and the threshold that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L0Choice<T> {
    pub l0: usize,
    pub epsilon: T,
    /// The largest positive lag still exceeded the threshold.
    pub saturated: bool,
}

/// `ε = (1 + α) max_{τ<0} |R(τ)|`; `L0` is the smallest positive lag beyond
/// which every |R(τ)| ≤ ε.
pub fn select_l0<T: Real>(r: &CrossCorrelation<T>, alpha: f64) -> Result<L0Choice<T>> {
    if r.max_lag() == 0 {
        return Err(Error::InsufficientLags);
    }
    let m = r.max_lag() as isize;
    let noise_floor = (1..=m)
        .map(|k| r.at(-k).abs())
        .fold(T::zero(), |a, b| a.max(b));
    let epsilon = T::lit(1.0 + alpha) * noise_floor;
    let last_above = (1..=m).rev().find(|&tau| r.at(tau).abs() > epsilon);
    let l0 = last_above.unwrap_or(1) as usize;
    let saturated = last_above == Some(m);
    if saturated {
        log::warn!("cross-correlation exceeds its threshold up to the largest lag {m}; L0 = {m}");
    }
    Ok(L0Choice {
        l0,
        epsilon,
        saturated,
    })
}

/// Number of estimated Markov parameters and its upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NChoice {
    pub n: usize,
    pub n_max: usize,
}

/// `N_max = ⌊(N_s + 1)/(n_u + 1) − L0⌋`.
pub fn n_upper_bound(ns: usize, nu: usize, l0: usize) -> Option<usize> {
    ((ns + 1) / (nu + 1)).checked_sub(l0)
}

/// Starts at `⌊N_max/2⌋` and decrements until `U = [Up; Uf]` has full row rank.
pub fn select_n<T: Real>(u: &SignalSequence<T>, l0: usize, rank_tolerance: f64) -> Result<NChoice> {
    let ns = u.len();
    let nu = u.channels();
    let n_max = match n_upper_bound(ns, nu, l0) {
        Some(v) if v >= 2 => v,
        _ => return Err(Error::NoValidN),
    };
    let mut n = n_max / 2;
    while n > 0 {
        let m = ns + 1 - l0 - n;
        // [Up; Uf] is a single block-Hankel matrix of depth L0 + N.
        let stacked = block_hankel(u, l0 + n, 0, m)?;
        if check_persistency(&stacked, rank_tolerance).full_row_rank {
            return Ok(NChoice { n, n_max });
        }
        n -= 1;
    }
    Err(Error::NoValidN)
}

/// Smallest noise variance accepted by the SMM estimator, relative to ‖Yp‖_F².
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Factorized SMM predictor for one set of data matrices.
///
/// Holds `F = Yp'Yp + L' σ² I` (Cholesky), `P = F⁻¹ U'` and the Cholesky
/// factor of `U P`.
pub struct SmmPredictor<T: Real> {
    mats: BehavioralMatrices<T>,
    u: DMatrix<T>,
    f_chol: Cholesky<T, Dyn>,
    p: DMatrix<T>,
    s_chol: Cholesky<T, Dyn>,
    sigma2: T,
}

impl<T: Real> SmmPredictor<T> {
    pub fn new(mats: BehavioralMatrices<T>, sigma2: T, rank_tolerance: f64) -> Result<Self> {
        if !(sigma2 >= T::zero()) {
            return Err(Error::InvalidArgument("noise variance must be nonnegative".into()));
        }
        let u = mats.u();
        let pers = check_persistency(&u, rank_tolerance);
        if !pers.full_row_rank {
            return Err(Error::NotPersistentlyExciting {
                rank: pers.numerical_rank,
                rows: u.nrows(),
            });
        }
        let reference = if mats.yp.is_empty() {
            mats.yf.norm_squared()
        } else {
            mats.yp.norm_squared()
        };
        let sigma2 = sigma2.max(T::lit(SIGMA2_FLOOR) * reference);
        let m = mats.columns();
        let mut f = mats.yp.tr_mul(&mats.yp);
        let ridge = T::from_usize_lossy(mats.window()) * sigma2;
        for i in 0..m {
            f[(i, i)] += ridge;
        }
        let f_chol = Cholesky::new(f).ok_or(Error::IllConditionedSaddle { rcond: 0.0 })?;
        let p = f_chol.solve(&u.transpose());
        let s = &u * &p;
        let s = (&s + s.transpose()) * T::lit(0.5);
        let s_chol = Cholesky::new(s).ok_or(Error::IllConditionedSaddle { rcond: 0.0 })?;
        let diag = s_chol.l_dirty().diagonal();
        let (dmin, dmax) = (diag.min(), diag.max());
        let rcond = (dmin / dmax).powi(2).to_f64_lossy();
        if !(rcond > 1e-16) {
            return Err(Error::IllConditionedSaddle { rcond });
        }
        Ok(Self {
            mats,
            u,
            f_chol,
            p,
            s_chol,
            sigma2,
        })
    }

    /// Variance actually used, after flooring.
    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn matrices(&self) -> &BehavioralMatrices<T> {
        &self.mats
    }

    /// `Y_f g` with `g = a + P (U P)⁻¹ ([u_ini; u] − U a)`, `a = F⁻¹ Yp' y_ini`.
    ///
    /// Inputs are stacked time-major: `u_ini` has `L0·n_u` entries, `y_ini`
    /// `L0·n_y`, `u` `N·n_u`. Returns `N·n_y` stacked outputs.
    pub fn respond(&self, u_ini: &DVector<T>, y_ini: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        let m = &self.mats;
        if u_ini.len() != m.l0 * m.nu || y_ini.len() != m.l0 * m.ny || u.len() != m.n * m.nu {
            return Err(Error::Dimension(format!(
                "expected u_ini {}, y_ini {}, u {} entries",
                m.l0 * m.nu,
                m.l0 * m.ny,
                m.n * m.nu
            )));
        }
        let a = if y_ini.iter().all(|v| *v == T::zero()) {
            DVector::zeros(m.columns())
        } else {
            self.f_chol.solve(&m.yp.tr_mul(y_ini))
        };
        let mut rhs = DVector::zeros(self.u.nrows());
        rhs.rows_mut(0, u_ini.len()).copy_from(u_ini);
        rhs.rows_mut(u_ini.len(), u.len()).copy_from(u);
        let rhs = rhs - &self.u * &a;
        let g = a + &self.p * self.s_chol.solve(&rhs);
        Ok(&m.yf * g)
    }

    /// Impulse response: zero initial window, unit impulse on each input in turn.
    pub fn markov(&self, ts: T) -> Result<MarkovSequence<T>> {
        let m = &self.mats;
        let mut blocks = vec![DMatrix::zeros(m.ny, m.nu); m.n];
        let u_ini = DVector::zeros(m.l0 * m.nu);
        let y_ini = DVector::zeros(m.l0 * m.ny);
        for j in 0..m.nu {
            let mut u = DVector::zeros(m.n * m.nu);
            u[j] = T::one();
            let y = self.respond(&u_ini, &y_ini, &u)?;
            for (k, block) in blocks.iter_mut().enumerate() {
                for i in 0..m.ny {
                    block[(i, j)] = y[k * m.ny + i];
                }
            }
        }
        MarkovSequence::new(blocks, ts)
    }
}

/// SMM estimate of the first `n` Markov parameters.
pub fn estimate_markov_smm<T: Real>(ds: &Dataset<T>, l0: usize, n: usize, sigma2: T) -> Result<MarkovSequence<T>> {
    let mats = build_behavioral(ds, l0, n)?;
    SmmPredictor::new(mats, sigma2, TuningConfig::default().rank_tolerance)?.markov(ds.ts())
}

/// Data-driven output prediction for input `u` after the initial window
/// (`u_ini`, `y_ini`). Each argument is channels × time steps.
pub fn data_driven_response<T: Real>(
    ds: &Dataset<T>,
    u_ini: &SignalSequence<T>,
    y_ini: &SignalSequence<T>,
    u: &SignalSequence<T>,
    sigma2: T,
) -> Result<SignalSequence<T>> {
    let l0 = u_ini.len();
    if y_ini.len() != l0 {
        return Err(Error::Dimension("u_ini and y_ini lengths differ".into()));
    }
    let n = u.len();
    let mats = build_behavioral(ds, l0, n)?;
    let ny = mats.ny;
    let predictor = SmmPredictor::new(mats, sigma2, TuningConfig::default().rank_tolerance)?;
    let flat = |s: &SignalSequence<T>| DVector::from_column_slice(s.data().as_slice());
    let y = predictor.respond(&flat(u_ini), &flat(y_ini), &flat(u))?;
    SignalSequence::new(DMatrix::from_column_slice(ny, n, y.as_slice()), ds.ts())
}

/// `M' = N_s − L0 − N + 1`, or `None` when no column fits.
pub fn data_columns(ns: usize, l0: usize, n: usize) -> Option<usize> {
    (ns + 1).checked_sub(l0 + n).filter(|&m| m >= 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_experiment, ExperimentSpec};
    use crate::systems::random_stable;
    use nalgebra::dmatrix;

    fn scalar(values: &[f64]) -> SignalSequence<f64> {
        SignalSequence::from_scalar(values, 1.0).unwrap()
    }

    fn fir_dataset(h: &[f64], ns: usize, seed: u64) -> Dataset<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..ns).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..ns)
            .map(|k| (0..h.len()).filter(|&j| j <= k).map(|j| h[j] * u[k - j]).sum())
            .collect();
        Dataset::new(scalar(&u), scalar(&y)).unwrap()
    }

    #[test]
    fn hankel_examples() {
        let s = scalar(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(block_hankel(&s, 2, 0, 3).unwrap(), dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]);
        assert_eq!(block_hankel(&s, 1, 1, 3).unwrap(), dmatrix![2.0, 3.0, 4.0]);
        assert!(matches!(block_hankel(&s, 2, 1, 3), Err(Error::OutOfRange(_))));
        let two = SignalSequence::from_samples(&[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]], 1.0).unwrap();
        let h = block_hankel(&two, 2, 0, 2).unwrap();
        assert_eq!(h, dmatrix![1.0, 2.0; 10.0, 20.0; 2.0, 3.0; 20.0, 30.0]);
    }

    #[test]
    fn behavioral_sizes_and_smallest_case() {
        let ds = fir_dataset(&[0.0, 1.0], 1000, 1);
        let m = build_behavioral(&ds, 66, 217).unwrap();
        assert_eq!(m.columns(), 718);
        assert_eq!(m.up.nrows(), 66);
        assert_eq!(m.uf.nrows(), 217);
        assert_eq!(m.u().nrows(), 283);

        let u = scalar(&[1.0, 2.0, 3.0]);
        let y = scalar(&[4.0, 5.0, 6.0]);
        let m = build_behavioral(&Dataset::new(u, y).unwrap(), 1, 1).unwrap();
        assert_eq!(m.up, dmatrix![1.0, 2.0]);
        assert_eq!(m.uf, dmatrix![2.0, 3.0]);
        assert_eq!(m.yp, dmatrix![4.0, 5.0]);
        assert_eq!(m.yf, dmatrix![5.0, 6.0]);
        assert!(build_behavioral(&ds, 600, 500).is_err());
    }

    #[test]
    fn persistency_examples() {
        let p = check_persistency(&DMatrix::<f64>::identity(3, 3), 1e-10);
        assert!(p.full_row_rank);
        assert_eq!(p.numerical_rank, 3);
        let rep = dmatrix![1.0, 2.0, 3.0; 1.0, 2.0, 3.0];
        assert!(!check_persistency(&rep, 1e-10).full_row_rank);
        let ds = fir_dataset(&[1.0], 1000, 2);
        let m = build_behavioral(&ds, 66, 217).unwrap();
        assert!(check_persistency(&m.u(), 1e-10).full_row_rank);
    }

    #[test]
    fn ls_recovers_fir() {
        let ds = fir_dataset(&[0.0, 1.0, 0.5], 200, 3);
        let h = estimate_markov_ls(&ds, 3).unwrap().scalar_values();
        for (a, b) in h.iter().zip([0.0, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-10);
        }
        let sigma2 = estimate_noise_variance(&ds, &estimate_markov_ls(&ds, 5).unwrap()).unwrap();
        assert!(sigma2 <= 1e-20);
    }

    #[test]
    fn ls_with_impulse_input_reads_off_output() {
        let model = random_stable(3, 1, 1, 0.8, true, 4).unwrap();
        let ns = 20;
        let u = SignalSequence::impulse(1, 0, ns, 1.0).unwrap();
        let y = model.simulate(&u, None).unwrap();
        let ds = Dataset::new(u, y.clone()).unwrap();
        // The impulse regressor is rank deficient unless N = 1.
        let h = estimate_markov_ls(&ds, 1).unwrap();
        assert!((h.block(0)[(0, 0)] - y.data()[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn ls_rejects_rank_deficiency_and_long_windows() {
        let u = scalar(&vec![1.0; 50]);
        let y = scalar(&vec![2.0; 50]);
        let ds = Dataset::new(u, y).unwrap();
        assert!(matches!(estimate_markov_ls(&ds, 3), Err(Error::RankDeficientRegressor { .. })));
        assert!(estimate_markov_ls(&ds, 25).is_err());
    }

    #[test]
    fn noise_variance_close_to_truth() {
        let model = random_stable(4, 1, 1, 0.7, false, 5).unwrap();
        let ds = generate_experiment(&model, &ExperimentSpec::new(4000, 0.01, 6)).unwrap();
        let h = estimate_markov_ls(&ds, 60).unwrap();
        let s = estimate_noise_variance(&ds, &h).unwrap();
        assert!((s / 0.01 - 1.0).abs() < 0.1, "{s}");
        assert!(matches!(
            estimate_noise_variance(&fir_dataset(&[1.0], 4, 1), &MarkovSequence::from_scalar(&[0.0; 4], 1.0).unwrap()),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn cross_correlation_examples() {
        let base = fir_dataset(&[1.0], 500, 7);
        let r = cross_correlation(&base);
        let peak = r.lags().max_by(|&a, &b| r.at(a).abs().total_cmp(&r.at(b).abs())).unwrap();
        assert_eq!(peak, 0);
        let delayed = fir_dataset(&[0.0, 0.0, 0.0, 1.0], 500, 7);
        let r = cross_correlation(&delayed);
        let peak = r.lags().max_by(|&a, &b| r.at(a).abs().total_cmp(&r.at(b).abs())).unwrap();
        assert_eq!(peak, 3);
        // Direct oracle at a few lags.
        let (u, y) = (delayed.u.data(), delayed.y.data());
        for tau in [-4isize, 0, 3, 17] {
            let mut acc = 0.0;
            for k in 0..500isize {
                if (0..500).contains(&(k + tau)) {
                    acc += y[(k + tau) as usize] * u[k as usize];
                }
            }
            assert!((r.at(tau) - acc / 500.0).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_signals_correlate_weakly() {
        let a = fir_dataset(&[1.0], 1000, 8);
        let b = fir_dataset(&[1.0], 1000, 9);
        let ds = Dataset::new(a.u, b.u).unwrap();
        let r = cross_correlation(&ds);
        let bound = 5.0 / (1000f64).sqrt();
        assert!(r.values().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn select_l0_examples() {
        // lags -5..=5
        let mut values: Vec<f64> = vec![0.01, -0.02, 0.015, 0.0, 0.01, 1.0, 0.8, -0.5, 0.3, 0.0, 0.0];
        let r = CrossCorrelation::from_values(values.clone()).unwrap();
        let c = select_l0(&r, 0.4).unwrap();
        assert_eq!(c.l0, 3);
        assert!((c.epsilon - 0.028).abs() < 1e-15);
        assert!(!c.saturated);
        values[10] = 0.5;
        let c = select_l0(&CrossCorrelation::from_values(values).unwrap(), 0.4).unwrap();
        assert_eq!(c.l0, 5);
        assert!(c.saturated);
        let r = CrossCorrelation::from_values(vec![1.0]).unwrap();
        assert!(matches!(select_l0(&r, 0.4), Err(Error::InsufficientLags)));
    }

    #[test]
    fn select_n_examples() {
        assert_eq!(n_upper_bound(1000, 1, 66), Some(434));
        let u = fir_dataset(&[1.0], 1000, 10).u;
        assert_eq!(select_n(&u, 66, 1e-10).unwrap(), NChoice { n: 217, n_max: 434 });
        let u9 = fir_dataset(&[1.0], 9, 11).u;
        assert_eq!(select_n(&u9, 0, 1e-10).unwrap(), NChoice { n: 2, n_max: 5 });
        let constant = scalar(&vec![1.0; 100]);
        assert!(matches!(select_n(&constant, 3, 1e-10), Err(Error::NoValidN)));
    }

    #[test]
    fn smm_noise_free_matches_true_markov() {
        let model = random_stable(5, 1, 1, 0.85, true, 12).unwrap();
        let ds = generate_experiment(&model, &ExperimentSpec::new(400, 0.0, 13)).unwrap();
        let truth = model.impulse_response(40).unwrap();
        let est = estimate_markov_smm(&ds, 8, 40, 0.0).unwrap();
        let scale = truth.energy().sqrt();
        for k in 0..40 {
            let err = (est.block(k) - truth.block(k)).norm();
            assert!(err <= 1e-6 * scale, "k = {k}: {err}");
        }
    }

    #[test]
    fn smm_mimo_assembles_block_columns() {
        let model = random_stable(4, 2, 2, 0.8, false, 14).unwrap();
        let ds = generate_experiment(&model, &ExperimentSpec::new(600, 0.0, 15)).unwrap();
        let truth = model.impulse_response(20).unwrap();
        let est = estimate_markov_smm(&ds, 6, 20, 0.0).unwrap();
        let scale = truth.energy().sqrt();
        for k in 0..20 {
            assert!((est.block(k) - truth.block(k)).norm() <= 1e-6 * scale);
        }
    }

    #[test]
    fn smm_rejects_constant_input() {
        let ds = Dataset::new(scalar(&vec![1.0; 50]), scalar(&vec![1.0; 50])).unwrap();
        assert!(matches!(
            estimate_markov_smm(&ds, 2, 5, 0.1),
            Err(Error::NotPersistentlyExciting { .. })
        ));
    }

    #[test]
    fn data_driven_response_cases() {
        let model = random_stable(5, 1, 1, 0.85, false, 16).unwrap();
        let ds = generate_experiment(&model, &ExperimentSpec::new(400, 0.0, 17)).unwrap();
        let (l0, n) = (8, 30);
        let zeros = |len| SignalSequence::zeros(1, len, 1.0).unwrap();
        let y = data_driven_response(&ds, &zeros(l0), &zeros(l0), &zeros(n), 0.0).unwrap();
        assert!(y.data().iter().all(|v| *v == 0.0));

        let imp = SignalSequence::impulse(1, 0, n, 1.0).unwrap();
        let y = data_driven_response(&ds, &zeros(l0), &zeros(l0), &imp, 0.0).unwrap();
        let h = estimate_markov_smm(&ds, l0, n, 0.0).unwrap();
        assert_eq!(y.data().as_slice(), h.scalar_values().as_slice());

        // Arbitrary input after a nonzero initial trajectory.
        let u: Vec<f64> = (0..l0 + n).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let full_u = scalar(&u);
        let x0 = nalgebra::DVector::from_fn(5, |i, _| (i as f64 + 1.0) * 0.3);
        let full_y = model.simulate(&full_u, Some(&x0)).unwrap();
        let split = |s: &SignalSequence<f64>, a: usize, b: usize| scalar(&s.data().as_slice()[a..b]);
        let pred = data_driven_response(
            &ds,
            &split(&full_u, 0, l0),
            &split(&full_y, 0, l0),
            &split(&full_u, l0, l0 + n),
            0.0,
        )
        .unwrap();
        let truth = split(&full_y, l0, l0 + n);
        let err = (pred.data() - truth.data()).norm() / truth.data().norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn tuning_validation() {
        assert!(TuningConfig::default().validate().is_ok());
        let bad = TuningConfig { alpha: 1.5, ..TuningConfig::default() };
        assert!(bad.validate().is_err());
    }
}
