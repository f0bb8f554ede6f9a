//! Monte-Carlo ergodic capacity, in bits per channel use.
//!
//! Code capacity is `(1/2T)·E log₂det(I + ρ·H_eq·H_eqᵀ)` with
//! `ρ = α²·SNR/n_t`, where `α` is the design's energy scale. Trial `t`
//! always draws its channel from stream `t` of the seed, so code and
//! channel estimates taken with the same seed are paired.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{equivalent_channel, sample_channel_seeded};
use crate::design::StbcDesign;
use crate::error::{Result, StbcError};
use crate::linalg::{gram_schmidt_qr, realify, untilde_vec, ComplexMatrix, RealMatrix};
use crate::rng::stream_rng;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub snr_db: f64,
    #[serde(rename = "mean_bits")]
    pub mean: f64,
    #[serde(rename = "std_err")]
    pub std_error: f64,
    pub trials: usize,
}

impl CapacityEstimate {
    pub fn from_samples(snr_db: f64, samples: &[f64]) -> Self {
        let (mean, std_error) = mean_and_se(samples);
        Self {
            snr_db,
            mean,
            std_error,
            trials: samples.len(),
        }
    }
}

/// Sample mean and its standard error.
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(StbcError::Config(format!(
            "capacity estimates need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

/// `log₂det(I + ρ·AAᵀ)` from the QR factor of `[√ρ·A; I]`.
pub fn log2det_bordered(a: &RealMatrix, rho: f64) -> f64 {
    let (m, c) = (a.rows(), a.cols());
    let sr = rho.sqrt();
    let bordered = RealMatrix::from_fn(m + c, c, |i, j| {
        if i < m {
            sr * a[(i, j)]
        } else if i - m == j {
            1.0
        } else {
            0.0
        }
    });
    let qr = gram_schmidt_qr(&bordered, 1e-300).expect("bordered matrix has full column rank");
    qr.r.diag().iter().map(|x| 2.0 * x.log2()).sum()
}

/// `log₂det(I + ρ·AAᵀ)` by LU of the `rows × rows` matrix.
pub fn log2det_lu(a: &RealMatrix, rho: f64) -> f64 {
    let m = a.rows();
    let aat = a * &a.transpose();
    let k = RealMatrix::from_fn(m, m, |i, j| f64::from(u8::from(i == j)) + rho * aat[(i, j)]);
    k.log_abs_det().expect("square") / std::f64::consts::LN_2
}

/// `ρ = α²·SNR/n_t`.
pub fn effective_rho(design: &StbcDesign, snr: f64) -> f64 {
    design.energy_scale().powi(2) * snr / design.n_t() as f64
}

/// Per-trial mutual information of the code, trial `t` on stream `t`.
pub fn code_capacity_samples(
    design: &StbcDesign,
    n_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let rho = effective_rho(design, snr);
    let t = design.t() as f64;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let ch = sample_channel_seeded(design.n_t(), n_r, seed, trial as u64);
            let heq = equivalent_channel(&ch.h, design)?;
            Ok(log2det_bordered(&heq, rho) / (2.0 * t))
        })
        .collect()
}

pub fn code_capacity(
    design: &StbcDesign,
    n_r: usize,
    snr_db: f64,
    trials: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    check_trials(trials)?;
    let s = code_capacity_samples(design, n_r, db_to_linear(snr_db), trials, seed)?;
    Ok(CapacityEstimate::from_samples(snr_db, &s))
}

/// `log₂det(I + ρ·HHᴴ)` via the realified Hermitian matrix.
pub fn channel_mutual_information(h: &ComplexMatrix, rho: f64) -> f64 {
    let n_r = h.rows();
    let hh = h * &h.adjoint();
    let k = ComplexMatrix::from_fn(n_r, n_r, |i, j| {
        hh[(i, j)] * rho + if i == j { 1.0 } else { 0.0 }
    });
    realify(&k).log_abs_det().expect("square") / (2.0 * std::f64::consts::LN_2)
}

pub fn channel_capacity_samples(
    n_t: usize,
    n_r: usize,
    snr: f64,
    trials: usize,
    seed: u64,
) -> Vec<f64> {
    let rho = snr / n_t as f64;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            channel_mutual_information(&sample_channel_seeded(n_t, n_r, seed, trial as u64).h, rho)
        })
        .collect()
}

pub fn channel_capacity(
    n_t: usize,
    n_r: usize,
    snr_db: f64,
    trials: usize,
    seed: u64,
) -> Result<CapacityEstimate> {
    check_trials(trials)?;
    let s = channel_capacity_samples(n_t, n_r, db_to_linear(snr_db), trials, seed);
    Ok(CapacityEstimate::from_samples(snr_db, &s))
}

/// Mean and standard error of the per-trial difference `a − b`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_and_se(&d)
}

#[derive(Debug, Clone)]
pub struct LowSnrReport {
    /// `c_i = tr(A_iA_iᴴ)/n_t` for every weight.
    pub constants: Vec<f64>,
    pub proportional: bool,
    /// Common constant when every weight shares one.
    pub constant: Option<f64>,
    pub witness: Option<usize>,
    pub residual: f64,
    /// The common constant equals `1/n_r`.
    pub matches_receive_scaling: bool,
}

/// Checks `A_iA_iᴴ ∝ I` for every weight.
pub fn low_snr_condition(design: &StbcDesign, n_r: usize) -> LowSnrReport {
    let n = design.n_t();
    let mut constants = Vec::new();
    let mut witness = None;
    let mut residual: f64 = 0.0;
    for (i, w) in design.weights().iter().enumerate() {
        let g = w * &w.adjoint();
        let c = g.trace().expect("square").re / n as f64;
        let r = g.max_abs_diff(&ComplexMatrix::identity(n).scale(c.into()));
        residual = residual.max(r);
        if r > 1e-12 && witness.is_none() {
            witness = Some(i);
        }
        constants.push(c);
    }
    let proportional = witness.is_none();
    let common = constants.iter().all(|c| (c - constants[0]).abs() < 1e-12);
    let constant = (proportional && common).then_some(constants[0]);
    LowSnrReport {
        matches_receive_scaling: constant.is_some_and(|c| (c - 1.0 / n_r as f64).abs() < 1e-12),
        constants,
        proportional,
        constant,
        witness,
        residual,
    }
}

#[derive(Debug, Clone)]
pub struct HighSnrReport {
    pub exact: CapacityEstimate,
    /// `(c/2T)·log₂ρ + (1/2T)·Σ log₂ R(i,i)²`.
    pub via_r: CapacityEstimate,
    /// Mean and standard error of `exact − via_r`.
    pub gap: (f64, f64),
    /// `H_eq` is square, where the R form is the high-SNR limit of the
    /// exact value.
    pub square: bool,
    /// Trials redrawn because `H_eq` was rank deficient.
    pub resampled: usize,
}

/// Compares the exact log-det with the R-diagonal form on the same draws.
pub fn high_snr_decomposition(
    design: &StbcDesign,
    n_r: usize,
    snr_db: f64,
    trials: usize,
    seed: u64,
) -> Result<HighSnrReport> {
    check_trials(trials)?;
    let rho = effective_rho(design, db_to_linear(snr_db));
    let t = design.t() as f64;
    let cols = design.weights().len() as f64;
    let per: Vec<(f64, f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut redraws = 0;
            loop {
                let stream = trial as u64 | ((redraws as u64) << 40);
                let h = sample_channel_seeded(design.n_t(), n_r, seed, stream).h;
                let heq = equivalent_channel(&h, design)?;
                match gram_schmidt_qr(&heq, 1e-12) {
                    Ok(qr) => {
                        let rsum: f64 = qr.r.diag().iter().map(|x| (x * x).log2()).sum();
                        let via = (cols * rho.log2() + rsum) / (2.0 * t);
                        let exact = log2det_bordered(&heq, rho) / (2.0 * t);
                        return Ok((exact, via, redraws));
                    }
                    Err(StbcError::RankDeficient { .. }) => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let exact: Vec<f64> = per.iter().map(|p| p.0).collect();
    let via: Vec<f64> = per.iter().map(|p| p.1).collect();
    Ok(HighSnrReport {
        exact: CapacityEstimate::from_samples(snr_db, &exact),
        via_r: CapacityEstimate::from_samples(snr_db, &via),
        gap: paired_difference(&exact, &via),
        square: 2 * n_r * design.t() == design.weights().len(),
        resampled: per.iter().map(|p| p.2).sum(),
    })
}

/// Haar-distributed orthogonal matrix of size `n` (QR of a Gaussian matrix
/// with positive `R` diagonal).
pub fn haar_orthogonal(n: usize, seed: u64) -> RealMatrix {
    let mut rng = stream_rng(seed, 0);
    let g = RealMatrix::from_fn(n, n, |_, _| {
        let z = crate::rng::complex_gaussian(&mut rng);
        z.re * std::f64::consts::SQRT_2
    });
    gram_schmidt_qr(&g, 1e-12)
        .expect("Gaussian matrix is invertible")
        .q
}

/// Baseline design whose generator matrix is `O·G` for a fixed-seed Haar
/// orthogonal `O` acting on the whole `2n_tT`-dimensional signal space.
/// Weight norms and the Gram matrix `GᵀG` are unchanged; the structure that
/// forces zeros in R is not.
pub fn random_rotation_baseline(design: &StbcDesign, seed: u64) -> Result<StbcDesign> {
    let g = crate::design::generator_matrix(design);
    let o = haar_orthogonal(g.rows(), seed);
    let og = &o * &g;
    let (n, t) = (design.n_t(), design.t());
    let weights = (0..og.cols())
        .map(|j| {
            let v = untilde_vec(&og.column(j));
            ComplexMatrix::from_fn(n, t, |r, c| v[c * n + r])
        })
        .collect();
    let labels = (0..og.cols()).map(|j| format!("O·A{}", j + 1)).collect();
    design.with_weights(weights, labels)
}

/// Code capacity at each SNR, every point on the same channel draws.
pub fn capacity_sweep(
    design: &StbcDesign,
    n_r: usize,
    snr_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CapacityEstimate>> {
    snr_db
        .iter()
        .map(|&s| code_capacity(design, n_r, s, trials, seed))
        .collect()
}

pub fn write_capacity_csv<W: std::io::Write>(records: &[CapacityEstimate], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(["snr_db", "mean_bits", "std_err", "trials"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_capacity_csv(records: &[CapacityEstimate], path: &Path) -> Result<()> {
    write_capacity_csv(records, std::fs::File::create(path)?)
}

pub fn read_capacity_csv<R: std::io::Read>(input: R) -> Result<Vec<CapacityEstimate>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|x| x.map_err(StbcError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_generators, SignChoice};
    use crate::design::{
        build_rate1_4group, build_rate1_from, extend_full_rate, generator_matrix, GroupLayout,
        Provenance,
    };
    use crate::linalg::{dot, norm};
    use num_complex::Complex64;

    fn silver() -> StbcDesign {
        let set = build_generators(1, SignChoice::Plus).unwrap();
        extend_full_rate(&build_rate1_from(&set), 2, &set, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn determinant_routes_agree() {
        let d = build_rate1_4group(2).unwrap();
        for t in 0..20 {
            let h = sample_channel_seeded(4, 2, 3, t).h;
            let heq = equivalent_channel(&h, &d).unwrap();
            for rho in [1e-3, 1.0, 1e3] {
                let a = log2det_bordered(&heq, rho);
                let b = log2det_lu(&heq, rho);
                assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn zero_snr_gives_zero() {
        let d = build_rate1_4group(1).unwrap();
        let c = code_capacity(&d, 1, -200.0, 100, 1).unwrap();
        assert!(c.mean.abs() < 1e-15);
        assert!(code_capacity(&d, 1, 0.0, 10, 1).is_err());
    }

    #[test]
    fn alamouti_matches_channel_per_trial() {
        let d = build_rate1_4group(1).unwrap();
        let a = code_capacity_samples(&d, 1, 10.0, 100, 5).unwrap();
        let b = channel_capacity_samples(2, 1, 10.0, 100, 5);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn unitary_square_generator_matches_channel() {
        let d = silver();
        let g = generator_matrix(&d);
        assert!((&g.transpose() * &g).is_diagonal(1e-12));
        let a = code_capacity_samples(&d, 2, 100.0, 100, 8).unwrap();
        let b = channel_capacity_samples(2, 2, 100.0, 100, 8);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn low_snr_reports() {
        let d = build_rate1_4group(2).unwrap();
        let r = low_snr_condition(&d, 1);
        assert_eq!(r.constant, Some(1.0));
        assert!(r.matches_receive_scaling);
        let s = d
            .with_weights(
                d.weights()
                    .iter()
                    .map(|w| w.scale(Complex64::new(0.5f64.sqrt(), 0.0)))
                    .collect(),
                d.labels().to_vec(),
            )
            .unwrap();
        let r2 = low_snr_condition(&s, 2);
        assert!((r2.constant.unwrap() - 0.5).abs() < 1e-12);
        assert!(r2.matches_receive_scaling);
        let toy = StbcDesign::new(
            2,
            vec![
                ComplexMatrix::diagonal(&[Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]),
                ComplexMatrix::identity(2),
            ],
            vec!["D".into(), "I".into()],
            GroupLayout::uniform(1, 2, 1),
            1,
            Provenance::default(),
        )
        .unwrap();
        let r3 = low_snr_condition(&toy, 1);
        assert!(!r3.proportional);
        assert_eq!(r3.witness, Some(0));
    }

    #[test]
    fn r_diagonal_identity() {
        let d = silver();
        let h = sample_channel_seeded(2, 2, 4, 0).h;
        let heq = equivalent_channel(&h, &d).unwrap();
        let qr = gram_schmidt_qr(&heq, 1e-12).unwrap();
        for i in 0..heq.cols() {
            let hi = heq.column(i);
            let proj: f64 = (0..i).map(|j| dot(&qr.q.column(j), &hi).powi(2)).sum();
            let want = norm(&hi).powi(2) - proj;
            assert!((qr.r[(i, i)].powi(2) - want).abs() < 1e-9 * norm(&hi).powi(2));
        }
    }

    #[test]
    fn baseline_keeps_gram_matrix() {
        let d = build_rate1_4group(2).unwrap();
        let b = random_rotation_baseline(&d, 1).unwrap();
        let g0 = generator_matrix(&d);
        let g1 = generator_matrix(&b);
        let gram0 = &g0.transpose() * &g0;
        let gram1 = &g1.transpose() * &g1;
        assert!(gram0.max_abs_diff(&gram1) < 1e-10);
        assert!((b.energy_scale() - d.energy_scale()).abs() < 1e-12);
        let o = haar_orthogonal(16, 3);
        assert!(crate::gain::orthogonality_residual(&o) < 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let recs = vec![
            CapacityEstimate {
                snr_db: 0.0,
                mean: 1.25,
                std_error: 0.01,
                trials: 100,
            },
            CapacityEstimate {
                snr_db: 5.0,
                mean: 2.5,
                std_error: 0.02,
                trials: 100,
            },
        ];
        let mut buf = Vec::new();
        write_capacity_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("snr_db,mean_bits,std_err,trials\n"));
        assert_eq!(read_capacity_csv(buf.as_slice()).unwrap(), recs);
        let mut empty = Vec::new();
        write_capacity_csv(&[], &mut empty).unwrap();
        assert_eq!(empty, b"snr_db,mean_bits,std_err,trials\n");
    }
}
