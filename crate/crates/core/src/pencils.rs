//! Loewner and Hankel matrix pencils, SVD-based order selection and
//! projection onto reduced descriptor models.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lti::{DescriptorModel, Sampling};
use crate::scalar::{Entry, Real};
use crate::signal::MarkovSequence;
use crate::spectral::FrequencySamples;

/// How frequency samples are split between the two sides of a Loewner pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    /// 1-based odd positions left, even positions right.
    Alternate,
    /// First ⌈N/2⌉ points left, the rest right.
    HalfHalf,
}

impl Partition {
    pub fn name(self) -> &'static str {
        match self {
            Partition::Alternate => "alternate",
            Partition::HalfHalf => "half-half",
        }
    }

    /// Indices of the (left, right) subsets for `n` points.
    pub fn indices(self, n: usize) -> (Vec<usize>, Vec<usize>) {
        match self {
            Partition::Alternate => ((0..n).step_by(2).collect(), (1..n).step_by(2).collect()),
            Partition::HalfHalf => {
                let half = n.div_ceil(2);
                ((0..half).collect(), (half..n).collect())
            }
        }
    }
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alternate" => Ok(Partition::Alternate),
            "half-half" | "halfhalf" => Ok(Partition::HalfHalf),
            other => Err(Error::InvalidArgument(format!("unknown partition {other:?}"))),
        }
    }
}

/// Splits samples into disjoint (left, right) subsets.
pub fn partition<T: Real>(
    samples: &FrequencySamples<T>,
    scheme: Partition,
) -> Result<(FrequencySamples<T>, FrequencySamples<T>)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("partition needs at least two points".into()));
    }
    let (left, right) = scheme.indices(samples.len());
    Ok((samples.select(&left), samples.select(&right)))
}

/// Loewner pencil `(L, Ls)` with data matrices `V`, `W`.
///
/// Block rows follow the right points (`V` side), block columns the left
/// points (`W` side): `L_(i,j) = (H(z_i) − H(z_j)) / (z_i − z_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoewnerPencil<T: Real> {
    pub l: DMatrix<Complex<T>>,
    pub ls: DMatrix<Complex<T>>,
    /// Right-data blocks stacked vertically.
    pub v: DMatrix<Complex<T>>,
    /// Left-data blocks side by side.
    pub w: DMatrix<Complex<T>>,
    pub left_points: Vec<Complex<T>>,
    pub right_points: Vec<Complex<T>>,
    pub ts: T,
    pub scheme: Option<Partition>,
}

/// Smallest admissible distance between a left and a right point.
pub const MIN_POINT_SEPARATION: f64 = 1e-14;

pub fn build_loewner<T: Real>(
    left: &FrequencySamples<T>,
    right: &FrequencySamples<T>,
) -> Result<LoewnerPencil<T>> {
    let mut pencil = loewner_from_points(left.points(), left.values(), right.points(), right.values())?;
    pencil.ts = left.ts();
    Ok(pencil)
}

/// Pencil from arbitrary (not necessarily unit-circle) interpolation points.
pub fn loewner_from_points<T: Real>(
    left_points: &[Complex<T>],
    left_values: &[DMatrix<Complex<T>>],
    right_points: &[Complex<T>],
    right_values: &[DMatrix<Complex<T>>],
) -> Result<LoewnerPencil<T>> {
    if left_points.len() != left_values.len() || right_points.len() != right_values.len() {
        return Err(Error::Dimension("points and values differ in count".into()));
    }
    if left_points.is_empty() || right_points.is_empty() {
        return Err(Error::InvalidArgument("both point sets must be nonempty".into()));
    }
    let (ny, nu) = left_values[0].shape();
    if left_values.iter().chain(right_values).any(|v| v.shape() != (ny, nu)) {
        return Err(Error::Dimension("samples differ in shape".into()));
    }
    let (nr, nl) = (right_points.len(), left_points.len());
    let mut l = DMatrix::zeros(nr * ny, nl * nu);
    let mut ls = DMatrix::zeros(nr * ny, nl * nu);
    for (i, (&zi, hi)) in right_points.iter().zip(right_values).enumerate() {
        for (j, (&zj, hj)) in left_points.iter().zip(left_values).enumerate() {
            let dz = zi - zj;
            if dz.modulus() <= T::lit(MIN_POINT_SEPARATION) {
                return Err(Error::PointCollision { i, j });
            }
            let num = hi - hj;
            let nums = hi * zi - hj * zj;
            l.view_mut((i * ny, j * nu), (ny, nu)).copy_from(&(num / dz));
            ls.view_mut((i * ny, j * nu), (ny, nu)).copy_from(&(nums / dz));
        }
    }
    let mut v = DMatrix::zeros(nr * ny, nu);
    for (i, hi) in right_values.iter().enumerate() {
        v.view_mut((i * ny, 0), (ny, nu)).copy_from(hi);
    }
    let mut w = DMatrix::zeros(ny, nl * nu);
    for (j, hj) in left_values.iter().enumerate() {
        w.view_mut((0, j * nu), (ny, nu)).copy_from(hj);
    }
    Ok(LoewnerPencil {
        l,
        ls,
        v,
        w,
        left_points: left_points.to_vec(),
        right_points: right_points.to_vec(),
        ts: T::one(),
        scheme: None,
    })
}

/// Partitions `samples` with `scheme` and builds the pencil.
pub fn build_loewner_partitioned<T: Real>(
    samples: &FrequencySamples<T>,
    scheme: Partition,
) -> Result<LoewnerPencil<T>> {
    let (left, right) = partition(samples, scheme)?;
    let mut pencil = build_loewner(&left, &right)?;
    pencil.scheme = Some(scheme);
    Ok(pencil)
}

/// Singular values of a pencil matrix and the two order suggestions.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SvdReport {
    pub singular_values: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Count of normalized values at or above the threshold.
    pub threshold_order: usize,
    /// Position of the largest drop `log10(σ_k / σ_{k+1})`, k ≤ 100.
    pub gap_order: usize,
}

/// Largest index considered by the gap rule.
pub const GAP_SEARCH_LIMIT: usize = 100;

impl SvdReport {
    /// Builds the report from nonincreasing singular values.
    pub fn from_singular_values(values: Vec<f64>, threshold: f64) -> Result<Self> {
        let smax = values.first().copied().unwrap_or(0.0);
        if !(smax > 0.0) {
            return Err(Error::InvalidArgument("matrix has no nonzero singular value".into()));
        }
        let normalized: Vec<f64> = values.iter().map(|s| s / smax).collect();
        let threshold_order = normalized.iter().filter(|&&s| s >= threshold).count();
        let limit = GAP_SEARCH_LIMIT.min(values.len().saturating_sub(1));
        // Values at round-off level count as zero so ratios between them are ignored.
        let floor = smax * values.len() as f64 * f64::EPSILON;
        let clean = |s: f64| if s > floor { s } else { 0.0 };
        let mut best = (values.len(), 0.0_f64);
        for k in 1..=limit {
            let (a, b) = (clean(values[k - 1]), clean(values[k]));
            let gap = if b > 0.0 {
                (a / b).log10()
            } else if a > 0.0 {
                f64::INFINITY
            } else {
                continue;
            };
            if gap > best.1 {
                best = (k, gap);
            }
        }
        // Flat spectra have no meaningful gap.
        let gap_order = if best.1 > 1e-10 { best.0 } else { values.len() };
        Ok(Self {
            singular_values: values,
            normalized,
            threshold_order,
            gap_order,
        })
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values<S: Entry>(m: &DMatrix<S>) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .clone()
        .singular_values()
        .iter()
        .map(|s| s.to_f64_lossy())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn svd_order<S: Entry>(m: &DMatrix<S>, threshold: f64) -> Result<SvdReport> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    SvdReport::from_singular_values(singular_values(m), threshold)
}

/// Left and right singular vectors ordered by decreasing singular value.
fn sorted_subspaces<S: Entry>(m: &DMatrix<S>) -> (DMatrix<S>, DMatrix<S>) {
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let x = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let y = DMatrix::from_fn(vt.ncols(), order.len(), |j, k| vt[(order[k], j)].conjugate());
    (x, y)
}

fn check_orders(orders: &[usize], max: usize) -> Result<()> {
    match orders.iter().find(|&&r| r == 0 || r > max) {
        Some(&r) => Err(Error::Order { r, max }),
        None => Ok(()),
    }
}

/// Projects the pencil onto the dominant `r`-dimensional subspaces of `L`:
/// `E = −X*LY`, `A = −X*LsY`, `B = X*V`, `C = WY`, `D = 0`.
pub fn loewner_reduce<T: Real>(pencil: &LoewnerPencil<T>, r: usize) -> Result<DescriptorModel<Complex<T>>> {
    Ok(loewner_reduce_orders(pencil, &[r])?.remove(0))
}

/// [`loewner_reduce`] for several orders sharing one SVD.
pub fn loewner_reduce_orders<T: Real>(
    pencil: &LoewnerPencil<T>,
    orders: &[usize],
) -> Result<Vec<DescriptorModel<Complex<T>>>> {
    check_orders(orders, pencil.l.nrows().min(pencil.l.ncols()))?;
    let (x_all, y_all) = sorted_subspaces(&pencil.l);
    orders
        .iter()
        .map(|&r| {
            let xh = x_all.columns(0, r).adjoint();
            let y = y_all.columns(0, r);
            let e = -(&xh * &pencil.l * y);
            let a = -(&xh * &pencil.ls * y);
            let b = &xh * &pencil.v;
            let c = &pencil.w * y;
            DescriptorModel::new(Some(e), a, b, c, None, Sampling::Discrete { ts: pencil.ts })
        })
        .collect()
}

/// Block-Hankel pencil of Markov parameters.
///
/// With `m = ⌊(N−1)/2⌋`, block (i, j) of `H` is `h_{i+j+1}` and of `Hs`
/// `h_{i+j+2}` (0-based i, j), so only `h_1 … h_{2m}` are used.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPencil<T: Real> {
    pub h: DMatrix<T>,
    pub hs: DMatrix<T>,
    /// `[h_1, …, h_m]`.
    pub first_row: DMatrix<T>,
    /// `[h_1; …; h_m]`.
    pub first_col: DMatrix<T>,
    pub h0: DMatrix<T>,
    pub depth: usize,
    pub ts: T,
}

pub fn build_hankel<T: Real>(h: &MarkovSequence<T>) -> Result<HankelPencil<T>> {
    let n = h.len();
    if n < 3 {
        return Err(Error::InvalidArgument("Hankel pencil needs at least three Markov parameters".into()));
    }
    let m = (n - 1) / 2;
    let (ny, nu) = (h.ny(), h.nu());
    let fill = |shift: usize| {
        DMatrix::from_fn(m * ny, m * nu, |r, c| h.block(r / ny + c / nu + shift)[(r % ny, c % nu)])
    };
    let first_row = DMatrix::from_fn(ny, m * nu, |r, c| h.block(c / nu + 1)[(r, c % nu)]);
    let first_col = DMatrix::from_fn(m * ny, nu, |r, c| h.block(r / ny + 1)[(r % ny, c)]);
    Ok(HankelPencil {
        h: fill(1),
        hs: fill(2),
        first_row,
        first_col,
        h0: h.block(0).clone(),
        depth: m,
        ts: h.ts(),
    })
}

/// Projected Hankel realization: `E = X*HY`, `A = X*HsY`, `C = [h_1…h_m]Y`,
/// `B = X*[h_1;…;h_m]`, `D = h_0`.
pub fn hankel_reduce<T: Real>(pencil: &HankelPencil<T>, r: usize) -> Result<DescriptorModel<T>> {
    Ok(hankel_reduce_orders(pencil, &[r])?.remove(0))
}

/// [`hankel_reduce`] for several orders sharing one SVD.
pub fn hankel_reduce_orders<T: Real>(pencil: &HankelPencil<T>, orders: &[usize]) -> Result<Vec<DescriptorModel<T>>> {
    check_orders(orders, pencil.h.nrows().min(pencil.h.ncols()))?;
    let (x_all, y_all) = sorted_subspaces(&pencil.h);
    orders
        .iter()
        .map(|&r| {
            let xt = x_all.columns(0, r).transpose();
            let y = y_all.columns(0, r);
            let e = &xt * &pencil.h * y;
            let a = &xt * &pencil.hs * y;
            let b = &xt * &pencil.first_col;
            let c = &pencil.first_row * y;
            DescriptorModel::new(
                Some(e),
                a,
                b,
                c,
                Some(pencil.h0.clone()),
                Sampling::Discrete { ts: pencil.ts },
            )
        })
        .collect()
}
