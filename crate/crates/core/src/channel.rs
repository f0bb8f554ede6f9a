//! Rayleigh block fading, the equivalent real channel and the structure of
//! its R factor.

use rand::Rng;

use crate::design::{hurwitz_radon_residual, StbcDesign};
use crate::error::{Result, StbcError};
use crate::linalg::{gram_schmidt_qr, norm, tilde_vec, vec_columns, ComplexMatrix, RealMatrix};
use crate::rng::{complex_gaussian, stream_rng};

/// Default absolute tolerance for R entries after column normalization.
pub const ZERO_TOL: f64 = 1e-9;

/// One channel draw together with where it came from.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub seed: u64,
    pub stream: u64,
}

/// `n_r × n_t` matrix of i.i.d. `CN(0, 1)` entries.
pub fn sample_channel<R: Rng + ?Sized>(n_t: usize, n_r: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n_r, n_t, |_, _| complex_gaussian(rng))
}

/// Channel drawn from its own `(seed, stream)` substream.
pub fn sample_channel_seeded(n_t: usize, n_r: usize, seed: u64, stream: u64) -> ChannelRealization {
    let mut rng = stream_rng(seed, stream);
    ChannelRealization {
        h: sample_channel(n_t, n_r, &mut rng),
        seed,
        stream,
    }
}

/// `H_eq = (I_T ⊗ Ȟ) G`, built column by column as `tilde(vec(H A_i))`.
pub fn equivalent_channel(h: &ComplexMatrix, design: &StbcDesign) -> Result<RealMatrix> {
    if h.cols() != design.n_t() {
        return Err(StbcError::DimensionMismatch(format!(
            "channel has {} transmit antennas, design has {}",
            h.cols(),
            design.n_t()
        )));
    }
    let cols: Vec<Vec<f64>> = design
        .weights()
        .iter()
        .map(|w| tilde_vec(&vec_columns(&(h * w))))
        .collect();
    Ok(RealMatrix::from_fn(cols[0].len(), cols.len(), |i, j| {
        cols[j][i]
    }))
}

/// All weight pairs `i < j` with `A_iA_jᴴ + A_jA_iᴴ = 0`; the matching
/// columns of `H_eq` are orthogonal for every channel.
pub fn column_orthogonality_pairs(design: &StbcDesign) -> Vec<(usize, usize)> {
    let w = design.weights();
    let mut out = Vec::new();
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if hurwitz_radon_residual(&w[i], &w[j]) < crate::clifford::ALGEBRA_TOL {
                out.push((i, j));
            }
        }
    }
    out
}

/// R factor of the column-normalized `H_eq` and its zero pattern.
#[derive(Debug, Clone)]
pub struct RProfile {
    /// R of `H_eq` with unit-norm columns.
    pub r: RealMatrix,
    /// Column norms of `H_eq` before normalization.
    pub column_norms: Vec<f64>,
    /// `zero_mask[i][j]`: `|R(i, j)| < tol`.
    pub zero_mask: Vec<Vec<bool>>,
    pub tol: f64,
}

impl RProfile {
    /// Text grid of the mask: `0` for a zero entry, `x` otherwise, `.`
    /// below the diagonal.
    pub fn mask_grid(&self) -> String {
        let n = self.r.cols();
        let mut s = String::with_capacity(n * (n + 1));
        for i in 0..n {
            for j in 0..n {
                s.push(if j < i {
                    '.'
                } else if self.zero_mask[i][j] {
                    '0'
                } else {
                    'x'
                });
            }
            s.push('\n');
        }
        s
    }

    pub fn zero_count_upper(&self) -> usize {
        let n = self.r.cols();
        (0..n)
            .map(|i| (i..n).filter(|&j| self.zero_mask[i][j]).count())
            .sum()
    }
}

pub fn r_profile(h_eq: &RealMatrix, tol: f64) -> Result<RProfile> {
    let column_norms: Vec<f64> = (0..h_eq.cols()).map(|j| norm(&h_eq.column(j))).collect();
    if let Some(j) = column_norms.iter().position(|&c| c == 0.0) {
        return Err(StbcError::RankDeficient {
            column: j,
            residual: 0.0,
        });
    }
    let normalized = RealMatrix::from_fn(h_eq.rows(), h_eq.cols(), |i, j| {
        h_eq[(i, j)] / column_norms[j]
    });
    let qr = gram_schmidt_qr(&normalized, 1e-12)?;
    let n = qr.r.cols();
    let zero_mask = (0..n)
        .map(|i| (0..n).map(|j| qr.r[(i, j)].abs() < tol).collect())
        .collect();
    Ok(RProfile {
        r: qr.r,
        column_norms,
        zero_mask,
        tol,
    })
}

/// Entries `(i, j)`, `i < j`, that the layered block pattern forces to
/// zero: columns in the same layer but different groups.
pub fn mandated_zero_mask(design: &StbcDesign) -> Vec<Vec<bool>> {
    let n = design.weights().len();
    let layout = design.layout();
    let group: Vec<usize> = (0..n)
        .map(|i| layout.group_of(i).expect("partition"))
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    i < j
                        && group[i] != group[j]
                        && layout.layer_of_group(group[i]) == layout.layer_of_group(group[j])
                })
                .collect()
        })
        .collect()
}

/// Shape of one layer's diagonal block of R.
#[derive(Debug, Clone)]
pub struct LayerBlock {
    pub layer: usize,
    /// Largest entry outside the per-group sub-blocks.
    pub off_block_max: f64,
    /// Largest difference between per-group sub-blocks.
    pub block_spread: f64,
    /// The common sub-block `V`.
    pub v: RealMatrix,
    /// Diagonal block equals `I_g ⊗ V` with `V` upper triangular.
    pub kron_identity_form: bool,
}

/// Classifies each layer's diagonal block as `I_g ⊗ V` or not. Requires
/// contiguous equal-size groups.
pub fn layer_blocks(profile: &RProfile, design: &StbcDesign) -> Result<Vec<LayerBlock>> {
    let layout = design.layout();
    if !layout.is_contiguous() {
        return Err(StbcError::StructureError(
            "block analysis needs contiguous groups".into(),
        ));
    }
    let r = &profile.r;
    let mut out = Vec::with_capacity(design.layers());
    for layer in 0..design.layers() {
        let groups: Vec<&Vec<usize>> = layout.groups_in_layer(layer).collect();
        let size = groups[0].len();
        if groups.iter().any(|g| g.len() != size) {
            return Err(StbcError::StructureError(
                "groups in a layer differ in size".into(),
            ));
        }
        let first = &groups[0];
        let v = RealMatrix::from_fn(size, size, |i, j| r[(first[i], first[j])]);
        let mut off_block_max: f64 = 0.0;
        let mut block_spread: f64 = 0.0;
        for (p, gp) in groups.iter().enumerate() {
            for (q, gq) in groups.iter().enumerate() {
                for (a, &i) in gp.iter().enumerate() {
                    for (b, &j) in gq.iter().enumerate() {
                        if p == q {
                            block_spread = block_spread.max((r[(i, j)] - v[(a, b)]).abs());
                        } else {
                            off_block_max = off_block_max.max(r[(i, j)].abs());
                        }
                    }
                }
            }
        }
        let kron_identity_form = off_block_max < profile.tol
            && block_spread < profile.tol
            && v.is_upper_triangular(profile.tol);
        out.push(LayerBlock {
            layer,
            off_block_max,
            block_spread,
            v,
            kron_identity_form,
        });
    }
    Ok(out)
}

/// Largest `|R(i, j)|` over the mandated-zero entries.
pub fn mandated_zero_violation(profile: &RProfile, mask: &[Vec<bool>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in mask.iter().enumerate() {
        for (j, &m) in row.iter().enumerate() {
            if m {
                worst = worst.max(profile.r[(i, j)].abs());
            }
        }
    }
    worst
}

/// Per-entry statistics of `|R(i, j)|` across channel draws.
#[derive(Debug, Clone)]
pub struct ProfileStats {
    pub seeds: usize,
    pub mean_abs: RealMatrix,
    pub max_abs: RealMatrix,
    /// Fraction of draws in which the entry was below tolerance.
    pub zero_fraction: RealMatrix,
    pub mandated_violation: f64,
    pub all_layers_kron_form: bool,
}

/// Profiles `seeds` channel draws (stream `0..seeds` of `seed`).
pub fn profile_statistics(
    design: &StbcDesign,
    n_r: usize,
    seeds: usize,
    seed: u64,
    tol: f64,
) -> Result<ProfileStats> {
    let n = design.weights().len();
    let mut mean_abs = RealMatrix::zeros(n, n);
    let mut max_abs = RealMatrix::zeros(n, n);
    let mut zero_fraction = RealMatrix::zeros(n, n);
    let mask = mandated_zero_mask(design);
    let mut mandated_violation: f64 = 0.0;
    let mut all_layers_kron_form = true;
    for s in 0..seeds {
        let ch = sample_channel_seeded(design.n_t(), n_r, seed, s as u64);
        let profile = r_profile(&equivalent_channel(&ch.h, design)?, tol)?;
        mandated_violation = mandated_violation.max(mandated_zero_violation(&profile, &mask));
        if design.layout().is_contiguous() {
            all_layers_kron_form &= layer_blocks(&profile, design)?
                .iter()
                .all(|b| b.kron_identity_form);
        }
        for i in 0..n {
            for j in 0..n {
                let v = profile.r[(i, j)].abs();
                mean_abs[(i, j)] += v / seeds as f64;
                max_abs[(i, j)] = max_abs[(i, j)].max(v);
                if profile.zero_mask[i][j] {
                    zero_fraction[(i, j)] += 1.0 / seeds as f64;
                }
            }
        }
    }
    Ok(ProfileStats {
        seeds,
        mean_abs,
        max_abs,
        zero_fraction,
        mandated_violation,
        all_layers_kron_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_generators, SignChoice};
    use crate::design::{
        build_rate1_4group, build_rate1_from, codeword, extend_full_rate, GroupLayout, Provenance,
    };
    use num_complex::Complex64;
    use rand::Rng;

    #[test]
    fn channel_moments() {
        let mut rng = stream_rng(1, 0);
        let n = 100_000;
        let (mut mean, mut var) = (Complex64::new(0., 0.), 0.0);
        for _ in 0..n {
            let z = sample_channel(1, 1, &mut rng)[(0, 0)];
            mean += z;
            var += z.norm_sqr();
        }
        mean /= n as f64;
        var /= n as f64;
        assert!(mean.norm() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
        let a = sample_channel_seeded(4, 2, 7, 3).h;
        let b = sample_channel_seeded(4, 2, 7, 3).h;
        assert_eq!(a, b);
    }

    #[test]
    fn equivalent_channel_identity() {
        let d = build_rate1_4group(2).unwrap();
        let mut rng = stream_rng(5, 0);
        let h = sample_channel(4, 3, &mut rng);
        let heq = equivalent_channel(&h, &d).unwrap();
        assert_eq!((heq.rows(), heq.cols()), (24, 8));
        let s: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = tilde_vec(&vec_columns(&(&h * &codeword(&d, &s).unwrap())));
        let via = heq.matvec(&s);
        assert!(direct.iter().zip(&via).all(|(a, b)| (a - b).abs() < 1e-10));
        assert!(equivalent_channel(&ComplexMatrix::zeros(2, 3), &d).is_err());
    }

    #[test]
    fn alamouti_columns_orthogonal() {
        let d = build_rate1_4group(1).unwrap();
        let h = sample_channel(2, 1, &mut stream_rng(2, 0));
        let heq = equivalent_channel(&h, &d).unwrap();
        let gram = &heq.transpose() * &heq;
        assert!(gram.is_diagonal(1e-12));
        let pairs = column_orthogonality_pairs(&d);
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn i_and_ji_are_an_orthogonal_pair() {
        let i2 = ComplexMatrix::identity(2);
        let d = StbcDesign::new(
            2,
            vec![i2.clone(), i2.scale(Complex64::new(0., 1.))],
            vec!["I".into(), "jI".into()],
            GroupLayout::uniform(1, 2, 1),
            1,
            Provenance::default(),
        )
        .unwrap();
        assert_eq!(column_orthogonality_pairs(&d), vec![(0, 1)]);
    }

    #[test]
    fn rate1_a3_block_is_kron_form() {
        let d = build_rate1_4group(3).unwrap();
        let h = sample_channel(8, 2, &mut stream_rng(11, 0));
        let p = r_profile(&equivalent_channel(&h, &d).unwrap(), ZERO_TOL).unwrap();
        let blocks = layer_blocks(&p, &d).unwrap();
        assert_eq!(blocks.len(), 1);
        assert!(blocks[0].kron_identity_form, "{blocks:?}");
        assert_eq!(blocks[0].v.rows(), 4);
    }

    #[test]
    fn rate2_a3_matches_layered_pattern() {
        let set = build_generators(3, SignChoice::Plus).unwrap();
        let d = extend_full_rate(&build_rate1_from(&set), 2, &set, Complex64::new(1., 0.)).unwrap();
        let stats = profile_statistics(&d, 2, 5, 3, ZERO_TOL).unwrap();
        assert!(stats.mandated_violation < ZERO_TOL);
        assert!(stats.all_layers_kron_form);
        // the off-diagonal layer block stays dense
        let dense = (0..16)
            .flat_map(|i| (16..32).map(move |j| (i, j)))
            .filter(|&(i, j)| stats.zero_fraction[(i, j)] < 1.0)
            .count();
        assert!(dense > 200);
        let pairs = column_orthogonality_pairs(&d);
        let mask = mandated_zero_mask(&d);
        for (i, row) in mask.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m {
                    assert!(pairs.contains(&(i, j)));
                }
            }
        }
    }

    #[test]
    fn orthogonal_toy_gives_diagonal_r() {
        let d = build_rate1_4group(1).unwrap();
        let h = sample_channel(2, 2, &mut stream_rng(4, 0));
        let p = r_profile(&equivalent_channel(&h, &d).unwrap(), ZERO_TOL).unwrap();
        assert!(p.r.is_diagonal(1e-12));
        assert!(p.mask_grid().starts_with("x000\n"));
    }
}
