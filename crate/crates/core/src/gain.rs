//! Coding gain of the rate-1 construction: the sign matrix `W`, rotated
//! encoding and minimum determinants.
//!
//! For a difference confined to one group, `ΔS = D·F_m` with `D` diagonal,
//! so `det(ΔSΔSᴴ) = ∏_j (Σ_i d_{i,2j-1} Δs_i)^4`. Writing the group's
//! stored symbols as `s = W U x` turns the inner sums into
//! `√(n_t/2)·(U x)_j`, so the minimum determinant is the fourth power of a
//! product distance of `U`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decoder::Constellation;
use crate::design::{is_group_decodable, StbcDesign};
use crate::error::{Result, StbcError};
use crate::linalg::{ComplexMatrix, RealMatrix};

/// Orthogonality tolerance for rotations.
pub const ROTATION_TOL: f64 = 1e-10;
/// Default cap on determinant evaluations in [`min_determinant`].
pub const DEFAULT_DET_BUDGET: u128 = 10_000_000;

/// Diagonals of the first group's weights, checked to be `±1`.
pub fn group_one_diagonals(design: &StbcDesign) -> Result<Vec<Vec<f64>>> {
    let first = &design.layout().groups()[0];
    let n = design.n_t();
    first
        .iter()
        .map(|&i| {
            let w = &design.weights()[i];
            if !w.is_diagonal(1e-12) {
                return Err(StbcError::StructureError(format!(
                    "weight {} is not diagonal",
                    i + 1
                )));
            }
            let d: Vec<f64> = w.diag().iter().map(|z| z.re).collect();
            let signs_ok = w
                .diag()
                .iter()
                .all(|z| z.im.abs() < 1e-12 && (z.re.abs() - 1.0).abs() < 1e-12);
            if !signs_ok {
                return Err(StbcError::StructureError(format!(
                    "weight {} has non-±1 diagonal entries",
                    i + 1
                )));
            }
            if (0..n / 2).any(|j| d[2 * j] != d[2 * j + 1]) && n > 1 {
                return Err(StbcError::StructureError(format!(
                    "weight {} does not repeat its diagonal in pairs",
                    i + 1
                )));
            }
            Ok(d.iter().map(|x| x.signum()).collect())
        })
        .collect()
}

/// `W = √(2/n_t)·[d_{i,2j-1}]`, rows indexed by first-group weight.
pub fn extract_w(design: &StbcDesign) -> Result<RealMatrix> {
    let d = group_one_diagonals(design)?;
    let half = design.n_t() / 2;
    if d.len() != half {
        return Err(StbcError::StructureError(format!(
            "first group has {} weights, expected {half}",
            d.len()
        )));
    }
    let c = (2.0 / design.n_t() as f64).sqrt();
    Ok(RealMatrix::from_fn(half, half, |i, j| c * d[i][2 * j]))
}

/// `‖MᵀM − I‖∞`.
pub fn orthogonality_residual(m: &RealMatrix) -> f64 {
    (&(&m.transpose() * m) - &RealMatrix::identity(m.cols())).max_abs()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RotationSource {
    Builtin,
    UserFile(String),
    Identity,
}

/// A real orthogonal rotation applied to each group's info symbols.
#[derive(Debug, Clone)]
pub struct RotationSpec {
    pub u: RealMatrix,
    pub source: RotationSource,
}

impl RotationSpec {
    pub fn new(u: RealMatrix, source: RotationSource) -> Result<Self> {
        if !u.is_square() {
            return Err(StbcError::NonSquare {
                rows: u.rows(),
                cols: u.cols(),
            });
        }
        let res = orthogonality_residual(&u);
        if res > ROTATION_TOL {
            return Err(StbcError::StructureError(format!(
                "rotation is not orthogonal (‖UᵀU - I‖ = {res:.3e})"
            )));
        }
        Ok(Self { u, source })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            u: RealMatrix::identity(dim),
            source: RotationSource::Identity,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::new(
            RealMatrix::from_text(&text)?,
            RotationSource::UserFile(path.display().to_string()),
        )
    }

    pub fn dim(&self) -> usize {
        self.u.rows()
    }
}

/// Orthogonal rotations with non-vanishing product distance on `ℤ^dim`.
///
/// Dimension 2 uses the rotation by `atan(2)/2`; dimensions 4, 8 and 16
/// use the DCT-IV matrix `√(2/n)·cos(π(2k+1)(2l+1)/(4n))`, whose rows are
/// conjugates of a generator of the maximal real subfield of a cyclotomic
/// field. Each is re-certified here: exhaustively over `{-2,0,2}^dim` up
/// to dimension 8, and over differences with at most four non-zero entries
/// at dimension 16.
pub fn builtin_rotation(dim: usize) -> Result<RotationSpec> {
    let u = match dim {
        1 => RealMatrix::identity(1),
        2 => {
            let t = 0.5 * 2f64.atan();
            RealMatrix::from_rows(&[vec![t.cos(), t.sin()], vec![-t.sin(), t.cos()]])?
        }
        4 | 8 | 16 => {
            let n = dim as f64;
            let c = (2.0 / n).sqrt();
            RealMatrix::from_fn(dim, dim, |k, l| {
                c * (PI * (2 * k + 1) as f64 * (2 * l + 1) as f64 / (4.0 * n)).cos()
            })
        }
        other => return Err(StbcError::UnsupportedDim(other)),
    };
    let spec = RotationSpec::new(u, RotationSource::Builtin)?;
    let max_support = if dim <= 8 { dim } else { 4 };
    let pd = min_product_distance(&spec.u, &[-2.0, 0.0, 2.0], max_support);
    if pd.is_nan() || pd <= 1e-9 {
        return Err(StbcError::StructureError(format!(
            "builtin rotation of dimension {dim} failed certification (product distance {pd:.3e})"
        )));
    }
    Ok(spec)
}

/// Minimum of `∏_j |(U Δ)_j|` over non-zero `Δ` with entries from
/// `alphabet` and at most `max_support` non-zero entries.
pub fn min_product_distance(u: &RealMatrix, alphabet: &[f64], max_support: usize) -> f64 {
    let dim = u.cols();
    let q = alphabet.len();
    let total = (q as u64).pow(dim as u32);
    (1..total)
        .into_par_iter()
        .filter_map(|code| {
            let mut c = code;
            let mut delta = vec![0.0; dim];
            let mut support = 0;
            for d in delta.iter_mut() {
                *d = alphabet[(c % q as u64) as usize];
                c /= q as u64;
                if *d != 0.0 {
                    support += 1;
                }
            }
            if support == 0 || support > max_support {
                return None;
            }
            Some(u.matvec(&delta).iter().map(|x| x.abs()).product::<f64>())
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Maps per-group info vectors to stored symbols.
#[derive(Debug, Clone)]
pub struct Encoder {
    design: StbcDesign,
    constellation: Constellation,
    /// `W U` (or the identity when unrotated), shared by every group.
    rotation: RealMatrix,
    rotated: bool,
    group_decodable: bool,
}

impl Encoder {
    /// Rotated encoding with group matrix `W U`. Requires the first layer
    /// to be the rate-1 construction.
    pub fn new(
        design: &StbcDesign,
        rotation: &RotationSpec,
        constellation: &Constellation,
    ) -> Result<Self> {
        let w = extract_w(design)?;
        if rotation.dim() != w.rows() {
            return Err(StbcError::DimensionMismatch(format!(
                "rotation is {}-dimensional, groups hold {} symbols",
                rotation.dim(),
                w.rows()
            )));
        }
        let rotation = &w * &rotation.u;
        Self::with_group_matrix(design, rotation, true, constellation)
    }

    /// Stored symbols equal info symbols.
    pub fn unrotated(design: &StbcDesign, constellation: &Constellation) -> Result<Self> {
        let size = design.layout().groups()[0].len();
        Self::with_group_matrix(design, RealMatrix::identity(size), false, constellation)
    }

    fn with_group_matrix(
        design: &StbcDesign,
        rotation: RealMatrix,
        rotated: bool,
        constellation: &Constellation,
    ) -> Result<Self> {
        let layout = design.layout();
        if !layout.is_contiguous() || layout.groups().iter().any(|g| g.len() != rotation.rows()) {
            return Err(StbcError::StructureError(
                "encoder needs contiguous groups of equal size".into(),
            ));
        }
        if orthogonality_residual(&rotation) > ROTATION_TOL {
            return Err(StbcError::StructureError(
                "group rotation is not orthogonal".into(),
            ));
        }
        Ok(Self {
            design: design.clone(),
            constellation: constellation.clone(),
            rotation,
            rotated,
            group_decodable: is_group_decodable(design),
        })
    }

    pub fn design(&self) -> &StbcDesign {
        &self.design
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn group_rotation(&self) -> &RealMatrix {
        &self.rotation
    }

    pub fn is_rotated(&self) -> bool {
        self.rotated
    }

    pub fn is_group_decodable(&self) -> bool {
        self.group_decodable
    }

    pub fn group_size(&self) -> usize {
        self.rotation.rows()
    }

    /// Real symbols per codeword.
    pub fn len(&self) -> usize {
        self.design.weights().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rotates info values that are already known to be alphabet points.
    pub fn encode_values(&self, info: &[f64]) -> Vec<f64> {
        let k = self.group_size();
        info.chunks_exact(k)
            .flat_map(|x| self.rotation.matvec(x))
            .collect()
    }

    /// Stored symbols for real PAM level indices.
    pub fn encode_indices(&self, idx: &[usize]) -> Vec<f64> {
        let levels = self.constellation.levels();
        let info: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
        self.encode_values(&info)
    }

    /// Stored symbols for info values; each value must be a level of the
    /// real component alphabet.
    pub fn encode(&self, info: &[f64]) -> Result<Vec<f64>> {
        if info.len() != self.len() {
            return Err(StbcError::DimensionMismatch(format!(
                "expected {} info symbols, got {}",
                self.len(),
                info.len()
            )));
        }
        for &x in info {
            self.constellation
                .level_index(x)
                .ok_or(StbcError::AlphabetError(x))?;
        }
        Ok(self.encode_values(info))
    }

    /// Inverse rotation, returning info values.
    pub fn decode(&self, stored: &[f64]) -> Vec<f64> {
        let k = self.group_size();
        let rt = self.rotation.transpose();
        stored.chunks_exact(k).flat_map(|s| rt.matvec(s)).collect()
    }
}

/// Differences of the odd-integer PAM points `{±1, ±3, …}` with `m`
/// levels: `{-2(m-1), …, -2, 0, 2, …, 2(m-1)}`.
pub fn pam_differences(m: usize) -> Vec<f64> {
    let top = 2 * (m as i64 - 1);
    (-top..=top).step_by(2).map(|v| v as f64).collect()
}

/// Outcome of a minimum-determinant search.
#[derive(Debug, Clone)]
pub struct MinDetReport {
    pub group: usize,
    /// Minimum of `det(ΔSΔSᴴ)` from the literal matrices.
    pub literal: f64,
    /// Minimum from the closed-form product.
    pub closed_form: f64,
    /// Info-difference vector attaining the literal minimum.
    pub argmin: Vec<f64>,
    pub evaluations: u128,
}

/// `∏_j (Σ_i d_{i,2j-1} Δs_i)^4`.
pub fn closed_form_det(diagonals: &[Vec<f64>], delta_s: &[f64]) -> f64 {
    let n = diagonals[0].len();
    (0..n / 2)
        .map(|j| {
            let y: f64 = diagonals
                .iter()
                .zip(delta_s)
                .map(|(d, s)| d[2 * j] * s)
                .sum();
            y.powi(4)
        })
        .product()
}

/// Upper bound `(‖ΔS‖_F² / n_t)^n_t = (Σ Δs_i²)^n_t` on the determinant,
/// used as the scale for relative comparisons.
fn det_scale(delta_s: &[f64], n: i32) -> f64 {
    delta_s
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .powi(n)
        .max(1e-300)
}

/// `det(ΔSΔSᴴ)` for stored-symbol differences on the weights `group`.
pub fn literal_det(design: &StbcDesign, group: &[usize], delta_s: &[f64]) -> f64 {
    let n = design.n_t();
    let mut ds = ComplexMatrix::zeros(n, n);
    for (&i, &s) in group.iter().zip(delta_s) {
        ds = &ds + &design.weights()[i].scale(Complex64::new(s, 0.0));
    }
    (&ds * &ds.adjoint()).det().expect("square").re
}

/// Minimum determinant over non-zero info differences in one group,
/// computed literally and in closed form; the two must agree to `1e-9`
/// relative.
pub fn min_determinant(
    encoder: &Encoder,
    group: usize,
    alphabet: &[f64],
    budget: u128,
) -> Result<MinDetReport> {
    let design = encoder.design();
    let diagonals = group_one_diagonals(design)?;
    let members = design
        .layout()
        .groups()
        .get(group)
        .ok_or_else(|| StbcError::StructureError(format!("no group {group}")))?
        .clone();
    let k = members.len();
    let q = alphabet.len() as u128;
    let needed = q
        .checked_pow(k as u32)
        .unwrap_or(u128::MAX)
        .saturating_sub(1);
    if needed > budget {
        return Err(StbcError::BudgetExceeded { needed, budget });
    }
    let n = design.n_t() as i32;
    let results: Vec<(f64, f64, u64)> = (1..=needed as u64)
        .into_par_iter()
        .map(|code| {
            let dx = digits(code, alphabet, k);
            if dx.iter().all(|&v| v == 0.0) {
                return Ok((f64::INFINITY, f64::INFINITY, code));
            }
            let ds = encoder.group_rotation().matvec(&dx);
            let lit = literal_det(design, &members, &ds);
            let cf = closed_form_det(&diagonals, &ds);
            let scale = det_scale(&ds, n);
            if (lit - cf).abs() > 1e-9 * scale.max(cf.abs()) {
                return Err(StbcError::StructureError(format!(
                    "closed-form determinant {cf:.6e} disagrees with literal {lit:.6e}"
                )));
            }
            Ok((lit, cf, code))
        })
        .collect::<Result<_>>()?;
    let (mut literal, mut closed_form, mut best) = (f64::INFINITY, f64::INFINITY, 0);
    for (lit, cf, code) in results {
        if lit < literal {
            literal = lit;
            best = code;
        }
        closed_form = closed_form.min(cf);
    }
    Ok(MinDetReport {
        group,
        literal,
        closed_form,
        argmin: digits(best, alphabet, k),
        evaluations: needed,
    })
}

fn digits(mut code: u64, alphabet: &[f64], k: usize) -> Vec<f64> {
    let q = alphabet.len() as u64;
    let mut out = vec![0.0; k];
    for v in out.iter_mut().rev() {
        *v = alphabet[(code % q) as usize];
        code /= q;
    }
    out
}

type Gaussian = num_complex::Complex<i128>;

/// Exact `det(ΔS)` for integer stored differences, by fraction-free
/// elimination over the Gaussian integers. The weights must have entries
/// in `{0, ±1, ±j}`.
pub fn exact_det(design: &StbcDesign, group: &[usize], delta_s: &[i64]) -> Result<Gaussian> {
    let n = design.n_t();
    let mut m = vec![vec![Gaussian::new(0, 0); n]; n];
    for (&i, &s) in group.iter().zip(delta_s) {
        let w = &design.weights()[i];
        for r in 0..n {
            for c in 0..n {
                let z = w[(r, c)];
                let (re, im) = (z.re.round(), z.im.round());
                if (z.re - re).abs() > 1e-12 || (z.im - im).abs() > 1e-12 {
                    return Err(StbcError::StructureError(
                        "weight is not Gaussian-integer".into(),
                    ));
                }
                m[r][c] += Gaussian::new(re as i128, im as i128) * s as i128;
            }
        }
    }
    let mut sign = 1i128;
    let mut prev = Gaussian::new(1, 0);
    for k in 0..n {
        if m[k][k] == Gaussian::new(0, 0) {
            match (k + 1..n).find(|&r| m[r][k] != Gaussian::new(0, 0)) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return Ok(Gaussian::new(0, 0)),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = m[i][j] * m[k][k] - m[i][k] * m[k][j];
                m[i][j] = exact_div(num, prev);
            }
        }
        prev = m[k][k];
    }
    Ok(m[n - 1][n - 1] * sign)
}

fn exact_div(a: Gaussian, b: Gaussian) -> Gaussian {
    let den = b.norm_sqr();
    let num = a * b.conj();
    debug_assert!(
        num.re % den == 0 && num.im % den == 0,
        "inexact Bareiss step"
    );
    Gaussian::new(num.re / den, num.im / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::build_rate1_4group;
    use proptest::prelude::*;

    #[test]
    fn w_is_orthogonal_with_positive_first_row() {
        for a in 1..=4 {
            let d = build_rate1_4group(a).unwrap();
            let w = extract_w(&d).unwrap();
            assert_eq!(w.rows(), 1 << (a - 1));
            assert!(orthogonality_residual(&w) < 1e-12);
            let c = (2.0 / d.n_t() as f64).sqrt();
            assert!(w.row(0).iter().all(|&x| (x - c).abs() < 1e-15));
            assert!(w.as_slice().iter().all(|x| (x.abs() - c).abs() < 1e-15));
        }
        assert_eq!(
            extract_w(&build_rate1_4group(1).unwrap()).unwrap(),
            RealMatrix::identity(1)
        );
    }

    #[test]
    fn w_inner_products_are_traces() {
        let d = build_rate1_4group(3).unwrap();
        let w = extract_w(&d).unwrap();
        let first = &d.layout().groups()[0];
        for i in 0..4 {
            for j in 0..4 {
                let ip: f64 = (0..4).map(|c| w[(i, c)] * w[(j, c)]).sum();
                let tr = (&d.weights()[first[i]] * &d.weights()[first[j]])
                    .trace()
                    .unwrap();
                assert!((ip - tr.re / 8.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extract_w_rejects_non_diagonal_group() {
        let d = build_rate1_4group(2).unwrap();
        let mut w = d.weights().to_vec();
        w.swap(1, 2);
        let bad = d.with_weights(w, d.labels().to_vec()).unwrap();
        assert!(matches!(extract_w(&bad), Err(StbcError::StructureError(_))));
    }

    #[test]
    fn builtin_rotations_are_certified() {
        assert_eq!(builtin_rotation(1).unwrap().u, RealMatrix::identity(1));
        for dim in [2, 4, 8] {
            let r = builtin_rotation(dim).unwrap();
            assert!(orthogonality_residual(&r.u) < 1e-12);
            assert!(min_product_distance(&r.u, &[-2.0, 0.0, 2.0], dim) > 0.0);
        }
        assert!(matches!(
            builtin_rotation(3),
            Err(StbcError::UnsupportedDim(3))
        ));
    }

    #[test]
    fn identity_rotation_has_zero_product_distance() {
        assert_eq!(
            min_product_distance(&RealMatrix::identity(2), &[-2.0, 0.0, 2.0], 2),
            0.0
        );
    }

    #[test]
    fn unrotated_a2_min_det_is_zero() {
        let d = build_rate1_4group(2).unwrap();
        let enc = Encoder::unrotated(&d, &Constellation::qam(4).unwrap()).unwrap();
        let r = min_determinant(&enc, 0, &pam_differences(2), DEFAULT_DET_BUDGET).unwrap();
        assert!(r.literal.abs() < 1e-12);
        assert_eq!(r.closed_form, 0.0);
    }

    #[test]
    fn rotated_a2_min_det_is_positive_and_symmetric_across_groups() {
        let d = build_rate1_4group(2).unwrap();
        let enc = Encoder::new(
            &d,
            &builtin_rotation(2).unwrap(),
            &Constellation::qam(4).unwrap(),
        )
        .unwrap();
        let alpha = pam_differences(2);
        let r0 = min_determinant(&enc, 0, &alpha, DEFAULT_DET_BUDGET).unwrap();
        assert!(r0.literal > 1e-3);
        assert!((r0.literal - r0.closed_form).abs() < 1e-9 * r0.literal);
        for g in 1..4 {
            let rg = min_determinant(&enc, g, &alpha, DEFAULT_DET_BUDGET).unwrap();
            assert!((rg.literal - r0.literal).abs() < 1e-9 * r0.literal);
        }
        // matches the fourth power of the rotation's product distance
        let pd = min_product_distance(&builtin_rotation(2).unwrap().u, &alpha, 2);
        let want = (2f64.powi(2) * pd * pd).powi(2);
        assert!((r0.literal - want).abs() < 1e-9 * want);
    }

    #[test]
    fn budget_is_enforced() {
        let d = build_rate1_4group(3).unwrap();
        let enc = Encoder::unrotated(&d, &Constellation::qam(4).unwrap()).unwrap();
        let r = min_determinant(&enc, 0, &pam_differences(4), 100);
        assert!(matches!(
            r,
            Err(StbcError::BudgetExceeded {
                needed: 2400,
                budget: 100
            })
        ));
    }

    #[test]
    fn encoder_identity_at_a1_and_alphabet_check() {
        let d = build_rate1_4group(1).unwrap();
        let c = Constellation::qam(4).unwrap();
        let enc = Encoder::new(&d, &builtin_rotation(1).unwrap(), &c).unwrap();
        let l = c.levels()[0];
        let info = [l, -l, -l, l];
        assert_eq!(enc.encode(&info).unwrap(), info.to_vec());
        assert!(matches!(
            enc.encode(&[0.3, l, l, l]),
            Err(StbcError::AlphabetError(_))
        ));
    }

    #[test]
    fn exact_det_matches_closed_form() {
        for a in 2..=3 {
            let d = build_rate1_4group(a).unwrap();
            let diag = group_one_diagonals(&d).unwrap();
            let k = d.n_t() / 2;
            for g in 0..4 {
                let members = &d.layout().groups()[g];
                let ds: Vec<i64> = (0..k as i64).map(|i| 2 * i - 3).collect();
                let det = exact_det(&d, members, &ds).unwrap();
                let abs2 = det.norm_sqr();
                let dsf: Vec<f64> = ds.iter().map(|&x| x as f64).collect();
                assert_eq!(abs2 as f64, closed_form_det(&diag, &dsf));
            }
        }
    }

    proptest! {
        #[test]
        fn encode_roundtrip_preserves_norm(idx in proptest::collection::vec(0usize..4, 16)) {
            let d = build_rate1_4group(3).unwrap();
            let c = Constellation::qam(16).unwrap();
            let enc = Encoder::new(&d, &builtin_rotation(4).unwrap(), &c).unwrap();
            let info: Vec<f64> = idx.iter().map(|&i| c.levels()[i]).collect();
            let s = enc.encode(&info).unwrap();
            let back = enc.decode(&s);
            prop_assert!(info.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
            let n1: f64 = info.iter().map(|x| x * x).sum();
            let n2: f64 = s.iter().map(|x| x * x).sum();
            prop_assert!((n1 - n2).abs() < 1e-10);
        }

        #[test]
        fn closed_form_equals_literal(ds in proptest::collection::vec(-3.0f64..3.0, 4), g in 0usize..4) {
            let d = build_rate1_4group(3).unwrap();
            let diag = group_one_diagonals(&d).unwrap();
            let lit = literal_det(&d, &d.layout().groups()[g], &ds);
            let cf = closed_form_det(&diag, &ds);
            let scale = det_scale(&ds, 8);
            prop_assert!((lit - cf).abs() <= 1e-9 * scale.max(cf.abs()));
        }
    }
}
