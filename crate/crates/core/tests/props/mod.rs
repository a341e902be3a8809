//! Randomized invariant checks, shared by the `invariants` test target and
//! the acceptance runner.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use smmrom::dataio::{generate_experiment, load_dataset, save_dataset, Dataset, ExperimentSpec};
use smmrom::estimation::{
    build_behavioral, estimate_markov_ls, estimate_markov_smm, estimate_noise_variance, select_n, SmmPredictor,
    TuningConfig,
};
use smmrom::lti::DescriptorModel;
use smmrom::metrics::{fit_percentage, h2_freq_error, h2_impulse_error};
use smmrom::modelfile::{load_model, save_model, AnyModel};
use smmrom::pencils::{
    build_hankel, build_loewner_partitioned, hankel_reduce, loewner_from_points, loewner_reduce, partition,
    singular_values, Partition,
};
use smmrom::pipeline::{run_method, step_one, GridSpec, Method, PipelineConfig, Reference};
use smmrom::signal::{MarkovSequence, SignalSequence};
use smmrom::spectral::{frequency_to_markov, markov_to_frequency, FrequencySamples};
use smmrom::systems::random_stable;

pub const CASES: u32 = 100;

pub type Check = fn() -> Result<(), String>;

pub const SUITES: &[(&str, Check)] = &[
    ("lti: simulated impulse equals Markov parameters", lti_simulate_matches_markov),
    ("lti: conjugate symmetry on the unit circle", lti_conjugate_symmetry),
    ("lti: descriptor to standard keeps the impulse response", lti_descriptor_to_standard),
    ("dataio: generation is deterministic in the seed", dataio_deterministic),
    ("dataio: dataset and model files round-trip exactly", dataio_round_trip),
    ("estimation: LS recovers FIR systems exactly", estimation_ls_recovers_fir),
    ("estimation: SMM is invariant to column permutation", estimation_smm_permutation),
    ("estimation: selected N respects the row-count bound", estimation_select_n_bound),
    ("estimation: noise variance is nonnegative, zero iff exact", estimation_noise_variance_sign),
    ("estimation: SMM estimate is continuous in sigma2", estimation_sigma2_continuity),
    ("spectral: DFT samples are conjugate symmetric", spectral_conjugate_symmetry),
    ("spectral: inverse DFT recovers the Markov parameters", spectral_inverse),
    ("spectral: Parseval identity", spectral_parseval),
    ("pencils: partitions are disjoint and complete", pencils_partition),
    ("pencils: Loewner rank equals the order for exact data", pencils_loewner_rank),
    ("pencils: Loewner Sylvester identities", pencils_sylvester),
    ("pencils: conjugate-symmetric data gives real responses", pencils_real_response),
    ("pencils: Hankel reduction reproduces the Markov window", pencils_hankel_reproduction),
    ("metrics: invariant under joint negation", metrics_negation),
    ("metrics: fit is at most 100, equal only for exact estimates", metrics_fit_bound),
    ("metrics: triangle bound for normalized errors", metrics_triangle),
    ("pipeline: reports are deterministic", pipeline_deterministic),
    ("pipeline: saved model reproduces reported metrics", pipeline_model_reproduces_metrics),
    ("pipeline: step-1 choices satisfy their bounds", pipeline_hyper_bounds),
];

/// Runs every suite whose name starts with `group`, collecting failures.
pub fn run_group(group: &str) -> Vec<(&'static str, String)> {
    SUITES
        .iter()
        .filter(|(name, _)| name.starts_with(group))
        .filter_map(|(name, check)| check().err().map(|e| (*name, e)))
        .collect()
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn flat(h: &MarkovSequence<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(h.len() * h.ny(), h.nu(), |i, j| h.block(i / h.ny())[(i % h.ny(), j)])
}

fn system() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=6, 1usize..=2, 1usize..=2, any::<u64>())
}

fn lti_simulate_matches_markov() -> Result<(), String> {
    run((system(), 1usize..40), |((n, nu, ny, seed), len)| {
        let m = random_stable(n, nu, ny, 0.95, true, seed).map_err(fail)?;
        let h = m.impulse_response(len).map_err(fail)?;
        for ch in 0..nu {
            let u = SignalSequence::impulse(nu, ch, len, 1.0).map_err(fail)?;
            let y = m.simulate(&u, None).map_err(fail)?;
            let expected = DMatrix::from_fn(ny, len, |i, k| h.block(k)[(i, ch)]);
            prop_assert!(rel(y.data(), &expected) <= 1e-12);
        }
        Ok(())
    })
}

fn lti_conjugate_symmetry() -> Result<(), String> {
    run((system(), 0.0..PI), |((n, nu, ny, seed), w)| {
        let m = random_stable(n, nu, ny, 0.95, true, seed).map_err(fail)?;
        let z = Complex64::from_polar(1.0, w);
        let h = m.frequency_response(&[z, z.conj()]).map_err(fail)?;
        let diff = (&h[1] - h[0].map(|v| v.conj())).norm();
        prop_assert!(diff <= 1e-12 * h[0].norm().max(1.0));
        Ok(())
    })
}

fn lti_descriptor_to_standard() -> Result<(), String> {
    run((system(), any::<u64>()), |((n, nu, ny, seed), eseed)| {
        let m = random_stable(n, nu, ny, 0.9, true, seed).map_err(fail)?;
        let e = DMatrix::identity(n, n) + random_stable(n, 1, 1, 0.9, false, eseed).map_err(fail)?.a() * 0.3;
        let desc = DescriptorModel::new(
            Some(e.clone()),
            &e * m.a(),
            &e * m.b(),
            m.c().clone(),
            Some(m.d().clone()),
            m.sampling(),
        )
        .map_err(fail)?;
        let sv = e.singular_values();
        prop_assume!(sv.max() / sv.min() <= 1e6);
        let want = flat(&m.impulse_response(30).map_err(fail)?);
        let got = flat(&desc.to_standard().map_err(fail)?.impulse_response(30).map_err(fail)?);
        prop_assert!(rel(&got, &want) <= 1e-10);
        prop_assert!(rel(&flat(&desc.impulse_response(30).map_err(fail)?), &want) <= 1e-10);
        Ok(())
    })
}

fn dataio_deterministic() -> Result<(), String> {
    run((system(), 2usize..200, 0.0..1e-2, any::<u64>()), |((n, nu, ny, mseed), ns, s2, seed)| {
        let m = random_stable(n, nu, ny, 0.9, false, mseed).map_err(fail)?;
        let a = generate_experiment(&m, &ExperimentSpec::new(ns, s2, seed)).map_err(fail)?;
        let b = generate_experiment(&m, &ExperimentSpec::new(ns, s2, seed)).map_err(fail)?;
        prop_assert_eq!(&a.u, &b.u);
        prop_assert_eq!(&a.y, &b.y);
        let c = generate_experiment(&m, &ExperimentSpec::new(ns, s2, seed.wrapping_add(1))).map_err(fail)?;
        prop_assert_ne!(&a.u, &c.u);
        Ok(())
    })
}

fn dataio_round_trip() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run((system(), 2usize..60, any::<u64>()), |((n, nu, ny, seed), ns, case)| {
        let m = random_stable(n, nu, ny, 0.9, true, seed).map_err(fail)?;
        let ds = generate_experiment(&m, &ExperimentSpec::new(ns, 1e-3, seed)).map_err(fail)?;
        let path = dir.path().join(format!("d{case}.csv"));
        save_dataset(&path, &ds).map_err(fail)?;
        let back: Dataset<f64> = load_dataset(&path).map_err(fail)?;
        prop_assert_eq!(&back.u, &ds.u);
        prop_assert_eq!(&back.y, &ds.y);
        let mpath = dir.path().join(format!("m{case}.json"));
        let any = AnyModel::Real(m);
        save_model(&mpath, &any).map_err(fail)?;
        prop_assert_eq!(load_model(&mpath).map_err(fail)?, any);
        Ok(())
    })
}

/// Noise-free FIR record with white input drawn from `values`.
fn fir_dataset(taps: &[f64], input: &[f64]) -> Dataset<f64> {
    let y: Vec<f64> = (0..input.len())
        .map(|k| taps.iter().enumerate().filter(|(i, _)| *i <= k).map(|(i, h)| h * input[k - i]).sum())
        .collect();
    Dataset::new(
        SignalSequence::from_scalar(input, 1.0).unwrap(),
        SignalSequence::from_scalar(&y, 1.0).unwrap(),
    )
    .unwrap()
}

fn fir_case() -> impl Strategy<Value = (Vec<f64>, usize, Vec<f64>)> {
    (prop::collection::vec(-1.0..1.0f64, 1..8), 0usize..5).prop_flat_map(|(taps, extra)| {
        let n = taps.len() + extra;
        (Just(taps), Just(n), prop::collection::vec(-1.0..1.0f64, 6 * n + 20..200))
    })
}

fn estimation_ls_recovers_fir() -> Result<(), String> {
    run(fir_case(), |(taps, n, input)| {
        let ds = fir_dataset(&taps, &input);
        let h = estimate_markov_ls(&ds, n).map_err(fail)?;
        let mut want = taps.clone();
        want.resize(n, 0.0);
        let got = DMatrix::from_column_slice(n, 1, &h.scalar_values());
        prop_assert!(rel(&got, &DMatrix::from_column_slice(n, 1, &want)) <= 1e-10);
        Ok(())
    })
}

fn estimation_smm_permutation() -> Result<(), String> {
    run((system(), any::<u64>(), Just(()).prop_perturb(|_, mut rng| rng.next_u64())), |((n, nu, ny, seed), dseed, pseed)| {
        let m = random_stable(n, nu, ny, 0.8, false, seed).map_err(fail)?;
        let ds = generate_experiment(&m, &ExperimentSpec::new(150, 1e-3, dseed)).map_err(fail)?;
        let (l0, nn) = (n + 1, 8);
        let mats = build_behavioral(&ds, l0, nn).map_err(fail)?;
        let cols = mats.columns();
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut state = pseed | 1;
        for i in (1..cols).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let permuted = mats.permute_columns(&perm).map_err(fail)?;
        let a = SmmPredictor::new(mats, 1e-3, 1e-10).map_err(fail)?.markov(1.0).map_err(fail)?;
        let b = SmmPredictor::new(permuted, 1e-3, 1e-10).map_err(fail)?.markov(1.0).map_err(fail)?;
        prop_assert!(rel(&flat(&b), &flat(&a)) <= 1e-10);
        Ok(())
    })
}

fn estimation_select_n_bound() -> Result<(), String> {
    run((1usize..=3, 20usize..300, 1usize..20, any::<u64>()), |(nu, ns, l0, seed)| {
        let m = random_stable(2, nu, 1, 0.5, false, seed).map_err(fail)?;
        let ds = generate_experiment(&m, &ExperimentSpec::new(ns, 0.0, seed)).map_err(fail)?;
        match select_n(&ds.u, l0, 1e-10) {
            Ok(c) => {
                let columns = ns + 1 - l0 - c.n;
                prop_assert!(c.n >= 1);
                prop_assert!((c.n + l0) * nu <= columns, "N {} L0 {l0} nu {nu} M' {columns}", c.n);
            }
            Err(e) => prop_assert!(matches!(e, smmrom::Error::NoValidN), "{e}"),
        }
        Ok(())
    })
}

fn estimation_noise_variance_sign() -> Result<(), String> {
    run((fir_case(), 1e-6..1e-1f64, any::<u64>()), |((taps, n, input), s2, seed)| {
        let ds = fir_dataset(&taps, &input);
        let h = estimate_markov_ls(&ds, n).map_err(fail)?;
        let exact = estimate_noise_variance(&ds, &h).map_err(fail)?;
        prop_assert!((0.0..=1e-20).contains(&exact), "{exact}");
        let ychan = ds.y.channel(0);
        let noise = generate_experiment(
            &random_stable(1, 1, 1, 0.5, false, seed).map_err(fail)?,
            &ExperimentSpec::new(input.len(), 0.0, seed),
        )
        .map_err(fail)?;
        let noisy: Vec<f64> = ychan.iter().zip(noise.u.channel(0).iter()).map(|(y, e)| y + s2.sqrt() * e).collect();
        let ds = Dataset::new(ds.u.clone(), SignalSequence::from_scalar(&noisy, 1.0).unwrap()).map_err(fail)?;
        let h = estimate_markov_ls(&ds, n).map_err(fail)?;
        prop_assert!(estimate_noise_variance(&ds, &h).map_err(fail)? > 0.0);
        Ok(())
    })
}

fn estimation_sigma2_continuity() -> Result<(), String> {
    run((1usize..=4, any::<u64>()), |(n, seed)| {
        let m = random_stable(n, 1, 1, 0.8, false, seed).map_err(fail)?;
        let ds = generate_experiment(&m, &ExperimentSpec::new(200, 1e-2, seed)).map_err(fail)?;
        for k in 0..10 {
            let s2 = 1e-6 * 10f64.powf(0.5 * k as f64);
            let a = flat(&estimate_markov_smm(&ds, n + 2, 10, s2).map_err(fail)?);
            let b = flat(&estimate_markov_smm(&ds, n + 2, 10, s2 * (1.0 + 1e-6)).map_err(fail)?);
            prop_assert!(a.iter().all(|v| v.is_finite()));
            // relative change per relative step in sigma2
            let sensitivity = rel(&b, &a) / 1e-6;
            prop_assert!(sensitivity <= 10.0, "sigma2 {s2}: {sensitivity}");
        }
        Ok(())
    })
}

fn markov_case() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..80)
}

fn spectral_conjugate_symmetry() -> Result<(), String> {
    run(markov_case(), |h| {
        let f = markov_to_frequency(&MarkovSequence::from_scalar(&h, 1.0).unwrap()).map_err(fail)?;
        let v = f.values();
        let n = v.len();
        let scale = h.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        for i in 1..n {
            prop_assert!((v[n - i][(0, 0)] - v[i][(0, 0)].conj()).norm() <= 1e-12 * scale);
        }
        Ok(())
    })
}

fn spectral_inverse() -> Result<(), String> {
    run(markov_case(), |h| {
        let seq = MarkovSequence::from_scalar(&h, 1.0).unwrap();
        let back = frequency_to_markov(&markov_to_frequency(&seq).map_err(fail)?, 1.0).map_err(fail)?;
        let scale = h.iter().map(|x| x.abs()).fold(1.0, f64::max);
        prop_assert!(back.scalar_values().iter().zip(&h).all(|(a, b)| (a - b).abs() <= 1e-12 * scale));
        Ok(())
    })
}

fn spectral_parseval() -> Result<(), String> {
    run(markov_case(), |h| {
        let f = markov_to_frequency(&MarkovSequence::from_scalar(&h, 1.0).unwrap()).map_err(fail)?;
        let lhs: f64 = f.values().iter().map(|v| v[(0, 0)].norm_sqr()).sum::<f64>() / h.len() as f64;
        let rhs: f64 = h.iter().map(|x| x * x).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(f64::MIN_POSITIVE));
        Ok(())
    })
}

fn pencils_partition() -> Result<(), String> {
    run((2usize..60, any::<bool>()), |(n, half)| {
        let scheme = if half { Partition::HalfHalf } else { Partition::Alternate };
        let h: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let f = markov_to_frequency(&MarkovSequence::from_scalar(&h, 1.0).unwrap()).map_err(fail)?;
        let (l, r) = partition(&f, scheme).map_err(fail)?;
        prop_assert!(!l.is_empty() && !r.is_empty());
        let mut all: Vec<(u64, u64)> = l
            .points()
            .iter()
            .chain(r.points())
            .map(|z| (z.re.to_bits(), z.im.to_bits()))
            .collect();
        let mut orig: Vec<(u64, u64)> = f.points().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
        Ok(())
    })
}

/// Exact unit-circle samples at `count` equispaced points rotated by `phase`.
fn exact_samples(m: &DescriptorModel<f64>, count: usize, phase: f64) -> Result<FrequencySamples<f64>, TestCaseError> {
    let omega: Vec<f64> = (0..count).map(|k| phase + 2.0 * PI * k as f64 / count as f64).collect();
    let points: Vec<Complex64> = omega.iter().map(|&w| Complex64::from_polar(1.0, w)).collect();
    let values = m.frequency_response(&points).map_err(fail)?;
    FrequencySamples::with_points(omega, points, values).map_err(fail)
}

fn numerical_rank(sv: &[f64], tol: f64) -> usize {
    sv.iter().filter(|&&s| s > tol * sv[0]).count()
}

fn pencils_loewner_rank() -> Result<(), String> {
    run((1usize..=5, 0usize..6, 0.01..0.3f64, any::<bool>(), any::<u64>()), |(n, extra, phase, half, seed)| {
        let m = random_stable(n, 1, 1, 0.7, false, seed).map_err(fail)?;
        let f = exact_samples(&m, 2 * n + extra, phase)?;
        let scheme = if half { Partition::HalfHalf } else { Partition::Alternate };
        let p = build_loewner_partitioned(&f, scheme).map_err(fail)?;
        let rank = numerical_rank(&singular_values(&p.l), 1e-8);
        prop_assert_eq!(rank, n);
        Ok(())
    })
}

fn pencils_sylvester() -> Result<(), String> {
    let case = (1usize..8, 1usize..8, 1usize..=2, 1usize..=2, any::<u64>());
    run(case, |(nl, nr, ny, nu, seed)| {
        let mut rng = TestRng::from_seed(RngAlgorithm::ChaCha, &seed_bytes(seed));
        let mut cx = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let left: Vec<Complex64> = (0..nl).map(|k| Complex64::new(k as f64 + 0.5, 0.3)).collect();
        let right: Vec<Complex64> = (0..nr).map(|k| Complex64::new(-(k as f64) - 0.5, -0.2)).collect();
        let lv: Vec<DMatrix<Complex64>> = (0..nl).map(|_| DMatrix::from_fn(ny, nu, |_, _| cx())).collect();
        let rv: Vec<DMatrix<Complex64>> = (0..nr).map(|_| DMatrix::from_fn(ny, nu, |_, _| cx())).collect();
        let p = loewner_from_points(&left, &lv, &right, &rv).map_err(fail)?;
        let mu = DMatrix::from_fn(nr * ny, nr * ny, |i, j| if i == j { right[i / ny] } else { Complex64::default() });
        let lam = DMatrix::from_fn(nl * nu, nl * nu, |i, j| if i == j { left[i / nu] } else { Complex64::default() });
        // Ls − M L = 1 ⊗ W and Ls − L Λ = V ⊗ 1ᵀ
        let ones_w = DMatrix::from_fn(nr * ny, nl * nu, |i, j| p.w[(i % ny, j)]);
        let v_ones = DMatrix::from_fn(nr * ny, nl * nu, |i, j| p.v[(i, j % nu)]);
        let scale = p.ls.norm().max(1.0);
        prop_assert!((&p.ls - &mu * &p.l - ones_w).norm() <= 1e-12 * scale);
        prop_assert!((&p.ls - &p.l * &lam - v_ones).norm() <= 1e-12 * scale);
        Ok(())
    })
}

fn seed_bytes(seed: u64) -> [u8; 32] {
    let mut b = [0u8; 32];
    b[..8].copy_from_slice(&seed.to_le_bytes());
    b
}

fn pencils_real_response() -> Result<(), String> {
    // Long windows make the DFT feedthrough term −h_N negligible.
    run((1usize..=5, 0usize..20, any::<bool>(), any::<u64>()), |(n, extra, half, seed)| {
        let m = random_stable(n, 1, 1, 0.7, false, seed).map_err(fail)?;
        let len = 64 + extra;
        let h = m.impulse_response(len).map_err(fail)?;
        let f = markov_to_frequency(&h).map_err(fail)?;
        let scheme = if half { Partition::HalfHalf } else { Partition::Alternate };
        let p = build_loewner_partitioned(&f, scheme).map_err(fail)?;
        let sv = singular_values(&p.l);
        prop_assume!(numerical_rank(&sv, 1e-8) == n);
        let rom = loewner_reduce(&p, n).map_err(fail)?;
        let ir = rom.impulse_response_detailed(len).map_err(fail)?;
        prop_assert!(ir.max_imag <= 1e-6 * ir.norm, "{} vs {}", ir.max_imag, ir.norm);
        Ok(())
    })?;
    // Conjugate-closed point sets give real models for arbitrary data and order.
    let noisy = (1usize..20).prop_flat_map(|half| (prop::collection::vec(-1.0..1.0f64, 2 * half + 2), 1..=half + 1));
    run(noisy, |(h, r)| {
        let f = markov_to_frequency(&MarkovSequence::from_scalar(&h, 1.0).unwrap()).map_err(fail)?;
        let p = build_loewner_partitioned(&f, Partition::Alternate).map_err(fail)?;
        let sv = singular_values(&p.l);
        prop_assume!(sv[r - 1] > 1e-8 * sv[0] && (r == sv.len() || sv[r - 1] - sv[r] > 1e-6 * sv[0]));
        let rom = loewner_reduce(&p, r).map_err(fail)?;
        let ir = rom.impulse_response_detailed(h.len()).map_err(fail)?;
        prop_assert!(ir.max_imag <= 1e-6 * ir.norm, "{} vs {}", ir.max_imag, ir.norm);
        Ok(())
    })
}

fn pencils_hankel_reproduction() -> Result<(), String> {
    run((1usize..=6, 1usize..=2, 1usize..=2, 0usize..10, any::<u64>()), |(n, nu, ny, extra, seed)| {
        let m = random_stable(n, nu, ny, 0.9, true, seed).map_err(fail)?;
        let len = 2 * n + 3 + extra;
        let h = m.impulse_response(len).map_err(fail)?;
        let p = build_hankel(&h).map_err(fail)?;
        let sv = singular_values(&p.h);
        let r = numerical_rank(&sv, 1e-10);
        prop_assume!(r < sv.len() && r >= 1);
        let blocks = 2 * ((len - 1) / 2);
        let rom = hankel_reduce(&p, r).map_err(fail)?;
        let got = rom.impulse_response(blocks + 1).map_err(fail)?;
        let window = |s: &MarkovSequence<f64>| {
            MarkovSequence::new(s.blocks()[1..=blocks].to_vec(), 1.0).unwrap()
        };
        prop_assert!(rel(&flat(&window(&got)), &flat(&window(&h))) <= 1e-8);
        Ok(())
    })
}

fn metric_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| (prop::collection::vec(-5.0..5.0f64, n), prop::collection::vec(-5.0..5.0f64, n)))
}

fn seq(v: &[f64]) -> MarkovSequence<f64> {
    MarkovSequence::from_scalar(v, 1.0).unwrap()
}

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn metrics_negation() -> Result<(), String> {
    run(metric_pair(), |(a, b)| {
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        let (sa, sb, na, nb) = (seq(&a), seq(&b), seq(&neg(&a)), seq(&neg(&b)));
        prop_assert!(close(fit_percentage(&sa, &sb).map_err(fail)?, fit_percentage(&na, &nb).map_err(fail)?));
        prop_assert!(close(h2_impulse_error(&sa, &sb).map_err(fail)?, h2_impulse_error(&na, &nb).map_err(fail)?));
        let (fa, fb) = (markov_to_frequency(&sa).map_err(fail)?, markov_to_frequency(&sb).map_err(fail)?);
        let (fna, fnb) = (markov_to_frequency(&na).map_err(fail)?, markov_to_frequency(&nb).map_err(fail)?);
        prop_assert!(close(h2_freq_error(&fa, &fb).map_err(fail)?, h2_freq_error(&fna, &fnb).map_err(fail)?));
        Ok(())
    })
}

fn metrics_fit_bound() -> Result<(), String> {
    run(metric_pair(), |(a, b)| {
        let w = fit_percentage(&seq(&a), &seq(&b)).map_err(fail)?;
        prop_assert!(w <= 100.0);
        prop_assert_eq!(w == 100.0, a == b);
        prop_assert_eq!(fit_percentage(&seq(&b), &seq(&b)).map_err(fail)?, 100.0);
        Ok(())
    })
}

fn metrics_triangle() -> Result<(), String> {
    let triple = (2usize..40).prop_flat_map(|n| {
        let v = || prop::collection::vec(-5.0..5.0f64, n);
        (v(), v(), v())
    });
    run(triple, |(a, b, c)| {
        let (sa, sb, sc) = (seq(&a), seq(&b), seq(&c));
        let norm = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let cn = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bound = (norm(&a, &b) + norm(&b, &c)) / cn;
        prop_assert!(h2_impulse_error(&sa, &sc).map_err(fail)? <= bound * (1.0 + 1e-12));
        let f = |s: &MarkovSequence<f64>| markov_to_frequency(s).unwrap();
        let (fa, fb, fc) = (f(&sa), f(&sb), f(&sc));
        let fbound = (h2_freq_error(&fa, &fb).map_err(fail)? * fb.values().iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
            + h2_freq_error(&fb, &fc).map_err(fail)? * fc.values().iter().map(|v| v.norm_squared()).sum::<f64>().sqrt())
            / fc.values().iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        prop_assert!(h2_freq_error(&fa, &fc).map_err(fail)? <= fbound * (1.0 + 1e-12));
        Ok(())
    })
}

fn pipeline_case() -> impl Strategy<Value = (usize, u64, usize)> {
    (2usize..=4, any::<u64>(), 0usize..4)
}

fn pipeline_setup(n: usize, seed: u64) -> Result<(Dataset<f64>, Reference), TestCaseError> {
    let m = random_stable(n, 1, 1, 0.8, false, seed).map_err(fail)?;
    let ds = generate_experiment(&m, &ExperimentSpec::new(160, 1e-4, seed)).map_err(fail)?;
    let grid = GridSpec {
        w_min: 0.01,
        w_max: 3.0,
        count: 40,
    };
    let r = Reference::new(&AnyModel::Real(m), &grid, 60).map_err(fail)?;
    Ok((ds, r))
}

fn pipeline_deterministic() -> Result<(), String> {
    run(pipeline_case(), |(n, seed, method)| {
        let (ds, r) = pipeline_setup(n, seed)?;
        let cfg = PipelineConfig::new(Method::ALL[method]);
        let mut a = run_method(&ds, &cfg, Some(&r)).map_err(fail)?.report;
        let mut b = run_method(&ds, &cfg, Some(&r)).map_err(fail)?.report;
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        Ok(())
    })
}

fn pipeline_model_reproduces_metrics() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run(pipeline_case(), |(n, seed, method)| {
        let (ds, r) = pipeline_setup(n, seed)?;
        let out = run_method(&ds, &PipelineConfig::new(Method::ALL[method]), Some(&r)).map_err(fail)?;
        let path = dir.path().join(format!("{seed}-{method}.json"));
        save_model(&path, &out.model).map_err(fail)?;
        let again = r.score(&load_model(&path).map_err(fail)?, out.markov.as_ref()).map_err(fail)?;
        let m = out.report.metrics.unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        prop_assert!(close(again.freq_error, m.freq_error));
        prop_assert!(close(again.impulse_error, m.impulse_error));
        Ok(())
    })
}

fn pipeline_hyper_bounds() -> Result<(), String> {
    run((2usize..=5, any::<u64>(), 100usize..400, 0.0..=1.0f64), |(n, seed, ns, alpha)| {
        let m = random_stable(n, 1, 1, 0.85, false, seed).map_err(fail)?;
        let ds = generate_experiment(&m, &ExperimentSpec::new(ns, 1e-3, seed)).map_err(fail)?;
        let tuning = TuningConfig {
            alpha,
            ..TuningConfig::default()
        };
        let h = match step_one(&ds, &tuning) {
            Ok(one) => one.hyper,
            Err(e) => {
                prop_assert!(e.root().is_input_error() || matches!(e.root(), smmrom::Error::NoValidN), "{e}");
                return Ok(());
            }
        };
        let r = smmrom::estimation::cross_correlation(&ds);
        let eps = (1.0 + alpha) * (1..=r.max_lag()).map(|l| r.at(-(l as isize)).abs()).fold(0.0, f64::max);
        prop_assert_eq!(h.l0_epsilon, Some(eps));
        prop_assert!(h.l0 == 1 || r.at(h.l0 as isize).abs() > eps);
        prop_assert!((h.l0 + 1..=r.max_lag()).all(|l| r.at(l as isize).abs() <= eps));
        prop_assert_eq!(h.n_max, (ns + 1) / 2 - h.l0);
        prop_assert!(h.n <= h.n_max / 2);
        let u = build_behavioral(&ds, h.l0, h.n).map_err(fail)?.u();
        prop_assert_eq!(smmrom::estimation::numerical_rank(&u, 1e-10), u.nrows());
        Ok(())
    })
}
