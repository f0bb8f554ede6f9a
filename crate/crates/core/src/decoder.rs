//! Maximum-likelihood decoders.
//!
//! All decoders minimize `‖Y − g·H·S‖²` with `g = √(SNR/n_t)·α` (see
//! [`transmit_amplitude`]) over info vectors whose entries are levels of
//! the real component alphabet of a square QAM. Candidates are ordered
//! lexicographically by their level-index vector, and the first (lowest)
//! candidate wins ties. Info symbols `2c` and `2c+1` are the in-phase and
//! quadrature parts of complex symbol `c`.

use std::fmt;

use num_complex::Complex64;

use crate::channel::equivalent_channel;
use crate::design::{codeword, StbcDesign};
use crate::error::{Result, StbcError};
use crate::gain::Encoder;
use crate::linalg::{dot, gram_schmidt_qr, tilde_vec, vec_columns, ComplexMatrix, RealMatrix};

/// Largest candidate count the exhaustive oracle accepts.
pub const ORACLE_BUDGET: u128 = 1 << 24;

/// Square QAM with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    label: String,
    m: usize,
    side: usize,
    levels: Vec<f64>,
    points: Vec<Complex64>,
}

impl Constellation {
    /// `M`-QAM for a perfect square `M ≥ 4`.
    pub fn qam(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if m < 4 || side * side != m {
            return Err(StbcError::Config(format!(
                "only square QAM is supported (M = 4, 16, 64, ...), got {m}"
            )));
        }
        let scale = (3.0 / (2.0 * (m as f64 - 1.0))).sqrt();
        let levels: Vec<f64> = (0..side)
            .map(|i| (2.0 * i as f64 - (side as f64 - 1.0)) * scale)
            .collect();
        let points = (0..m)
            .map(|q| Complex64::new(levels[q / side], levels[q % side]))
            .collect();
        Ok(Self {
            label: format!("{m}-QAM"),
            m,
            side,
            levels,
            points,
        })
    }

    /// Parses `4qam`, `16-QAM`, `64QAM`, ...
    pub fn parse(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower.trim_end_matches("qam").trim_end_matches('-');
        let m = digits
            .parse::<usize>()
            .map_err(|_| StbcError::Config(format!("unknown constellation '{s}'")))?;
        Self::qam(m)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Levels per real dimension, `√M`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Real component alphabet, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Points indexed by `i_I·√M + i_Q`.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn level_index(&self, x: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - x).abs() < 1e-9)
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.m as f64
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// `√(SNR/n_t)·α`: the factor multiplying `H·S` for linear SNR `snr`,
/// including the design's energy normalization.
pub fn transmit_amplitude(snr: f64, design: &StbcDesign) -> f64 {
    (snr / design.n_t() as f64).sqrt() * design.energy_scale()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Level index of every real info symbol.
    pub info: Vec<usize>,
    /// QAM point index of every complex symbol.
    pub symbols: Vec<usize>,
    /// `‖Y − g·H·S‖²` at the decision, recomputed from scratch.
    pub metric: f64,
    pub metric_evaluations: u128,
}

fn symbols_of(info: &[usize], side: usize) -> Vec<usize> {
    info.chunks_exact(2).map(|c| c[0] * side + c[1]).collect()
}

/// `‖Y − g·H·S(x)‖²` for info level indices `info`.
pub fn metric(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
    info: &[usize],
) -> f64 {
    let s = encoder.encode_indices(info);
    let x = codeword(encoder.design(), &s).expect("length checked by encoder");
    let tx = (h * &x).scale(Complex64::new(amplitude, 0.0));
    (y - &tx).fro_norm_sq()
}

fn finish(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
    info: Vec<usize>,
    evaluations: u128,
) -> DecodeResult {
    DecodeResult {
        symbols: symbols_of(&info, encoder.constellation().side()),
        metric: metric(y, h, encoder, amplitude, &info),
        info,
        metric_evaluations: evaluations,
    }
}

fn check_dims(y: &ComplexMatrix, h: &ComplexMatrix, design: &StbcDesign) -> Result<()> {
    if h.cols() != design.n_t() || y.rows() != h.rows() || y.cols() != design.t() {
        return Err(StbcError::DimensionMismatch(format!(
            "Y is {}x{}, H is {}x{}, design is {}x{}",
            y.rows(),
            y.cols(),
            h.rows(),
            h.cols(),
            design.n_t(),
            design.t()
        )));
    }
    Ok(())
}

/// Advances a base-`side` counter whose last digit moves fastest.
/// Returns false after the last combination.
fn advance(idx: &mut [usize], side: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < side {
            return true;
        }
        *d = 0;
    }
    false
}

/// Exhaustive search over all `M^k` codewords.
pub fn ml_oracle(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
) -> Result<DecodeResult> {
    let design = encoder.design();
    check_dims(y, h, design)?;
    let side = encoder.constellation().side();
    let n = encoder.len();
    let candidates = (side as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if design.k() > 8 || candidates > ORACLE_BUDGET {
        return Err(StbcError::TooLarge {
            candidates,
            budget: ORACLE_BUDGET,
        });
    }
    // g·H·A_i, vectorized
    let ha: Vec<Vec<Complex64>> = design
        .weights()
        .iter()
        .map(|w| {
            vec_columns(&(h * w))
                .into_iter()
                .map(|z| z * amplitude)
                .collect()
        })
        .collect();
    let yv = vec_columns(y);
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, idx.clone());
    let mut evaluations = 0u128;
    let mut resid = vec![Complex64::new(0.0, 0.0); yv.len()];
    loop {
        let s = encoder.encode_indices(&idx);
        resid.copy_from_slice(&yv);
        for (col, &si) in ha.iter().zip(&s) {
            for (r, c) in resid.iter_mut().zip(col) {
                *r -= c * si;
            }
        }
        let m: f64 = resid.iter().map(|z| z.norm_sqr()).sum();
        evaluations += 1;
        if m < best.0 {
            best = (m, idx.clone());
        }
        if !advance(&mut idx, side) {
            break;
        }
    }
    Ok(finish(y, h, encoder, amplitude, best.1, evaluations))
}

/// One group of the first layer in the R domain.
struct GroupSearch {
    /// Weight (column) indices.
    cols: Vec<usize>,
    /// Orthonormal basis of the group's effective columns.
    q: RealMatrix,
    /// `R·x` for every info vector `x`, in lexicographic order.
    table: Vec<Vec<f64>>,
}

impl GroupSearch {
    fn new(b: &RealMatrix, cols: &[usize], levels: &[f64]) -> Result<Self> {
        let qr = gram_schmidt_qr(&b.select_columns(cols), 1e-12)?;
        let k = cols.len();
        let side = levels.len();
        let mut table = Vec::with_capacity(side.pow(k as u32));
        let mut idx = vec![0usize; k];
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| levels[i]).collect();
            table.push(qr.r.matvec(&x));
            if !advance(&mut idx, side) {
                break;
            }
        }
        Ok(Self {
            cols: cols.to_vec(),
            q: qr.q,
            table,
        })
    }

    /// Lowest-index minimizer of `‖z − R x‖²`.
    fn best(&self, z: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (c, rx) in self.table.iter().enumerate() {
            let m: f64 = z.iter().zip(rx).map(|(a, b)| (a - b) * (a - b)).sum();
            if m < best.1 {
                best = (c, m);
            }
        }
        best
    }

    fn indices(&self, code: usize, side: usize) -> Vec<usize> {
        let mut out = vec![0; self.cols.len()];
        let mut c = code;
        for d in out.iter_mut().rev() {
            *d = c % side;
            c /= side;
        }
        out
    }
}

/// `g·H_eq·E`, the map from info values to the realified received vector.
fn effective_channel(h: &ComplexMatrix, encoder: &Encoder, amplitude: f64) -> Result<RealMatrix> {
    let heq = equivalent_channel(h, encoder.design())?;
    let k = encoder.group_size();
    let rot = encoder.group_rotation();
    Ok(RealMatrix::from_fn(heq.rows(), heq.cols(), |r, c| {
        let g = c / k * k;
        amplitude
            * (0..k)
                .map(|i| heq[(r, g + i)] * rot[(i, c - g)])
                .sum::<f64>()
    }))
}

fn first_layer_searches(b: &RealMatrix, encoder: &Encoder) -> Result<Vec<GroupSearch>> {
    let levels = encoder.constellation().levels();
    encoder
        .design()
        .layout()
        .groups_in_layer(0)
        .map(|g| GroupSearch::new(b, g, levels))
        .collect()
}

/// Exact ML for a single-layer group-decodable design: each group is
/// searched on its own.
pub fn group_decode(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
) -> Result<DecodeResult> {
    let design = encoder.design();
    check_dims(y, h, design)?;
    if design.layers() != 1 || !encoder.is_group_decodable() {
        return Err(StbcError::NotGroupDecodable(
            "per-group decoding needs a single layer with orthogonal groups".into(),
        ));
    }
    let side = encoder.constellation().side();
    let b = effective_channel(h, encoder, amplitude)?;
    let yv = tilde_vec(&vec_columns(y));
    let mut info = vec![0; encoder.len()];
    let mut evaluations = 0u128;
    for gs in first_layer_searches(&b, encoder)? {
        let z = gs.q.adjoint_matvec(&yv);
        let (code, _) = gs.best(&z);
        evaluations += gs.table.len() as u128;
        for (&c, v) in gs.cols.iter().zip(gs.indices(code, side)) {
            info[c] = v;
        }
    }
    Ok(finish(y, h, encoder, amplitude, info, evaluations))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConditionalOptions {
    /// Skip outer candidates whose projected residual alone already
    /// exceeds the best metric. Returns the same decision with fewer
    /// evaluations.
    pub prune: bool,
    /// Refuse instances needing more evaluations than this.
    pub budget: Option<u128>,
}

/// Exact ML for a layered design: every combination of the outer layers'
/// symbols is enumerated and the first layer is group-decoded given it.
pub fn conditional_decode(
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
    options: ConditionalOptions,
) -> Result<DecodeResult> {
    let design = encoder.design();
    check_dims(y, h, design)?;
    if !encoder.is_group_decodable() {
        return Err(StbcError::NotGroupDecodable(
            "layers are not internally group decodable".into(),
        ));
    }
    let account = complexity_account(design, encoder.constellation());
    if let Some(budget) = options.budget {
        if account.evaluations > budget {
            return Err(StbcError::BudgetExceeded {
                needed: account.evaluations,
                budget,
            });
        }
    }
    let side = encoder.constellation().side();
    let levels = encoder.constellation().levels();
    let b = effective_channel(h, encoder, amplitude)?;
    let yv = tilde_vec(&vec_columns(y));
    let searches = first_layer_searches(&b, encoder)?;
    let outer: Vec<usize> = (design.layer_range(0).end..encoder.len()).collect();
    let b_out = b.select_columns(&outer);
    let z0: Vec<Vec<f64>> = searches.iter().map(|g| g.q.adjoint_matvec(&yv)).collect();
    let p: Vec<RealMatrix> = searches.iter().map(|g| &g.q.transpose() * &b_out).collect();

    let mut o_idx = vec![0usize; outer.len()];
    let mut best_metric = f64::INFINITY;
    let mut best_full: Vec<usize> = Vec::new();
    let mut evaluations = 0u128;
    let mut x_out = vec![0.0; outer.len()];
    loop {
        for (x, &i) in x_out.iter_mut().zip(&o_idx) {
            *x = levels[i];
        }
        let r: Vec<f64> = {
            let bx = b_out.matvec(&x_out);
            yv.iter().zip(&bx).map(|(a, b)| a - b).collect()
        };
        let z: Vec<Vec<f64>> = z0
            .iter()
            .zip(&p)
            .map(|(z0, pg)| {
                z0.iter()
                    .zip(pg.matvec(&x_out))
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let base = dot(&r, &r) - z.iter().map(|zg| dot(zg, zg)).sum::<f64>();
        if !(options.prune && base > best_metric) {
            let mut total = base;
            let mut full = vec![0; encoder.len()];
            for (gs, zg) in searches.iter().zip(&z) {
                let (code, m) = gs.best(zg);
                evaluations += gs.table.len() as u128;
                total += m;
                for (&c, v) in gs.cols.iter().zip(gs.indices(code, side)) {
                    full[c] = v;
                }
            }
            for (&c, &v) in outer.iter().zip(&o_idx) {
                full[c] = v;
            }
            if total < best_metric || (total == best_metric && full < best_full) {
                best_metric = total;
                best_full = full;
            }
        }
        if !advance(&mut o_idx, side) {
            break;
        }
    }
    Ok(finish(y, h, encoder, amplitude, best_full, evaluations))
}

/// Predicted metric evaluations per codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityAccount {
    /// Conditional/group decoder evaluations.
    pub evaluations: u128,
    /// Exponent `e` in the order `M^e`.
    pub order_exponent: f64,
    /// Evaluations of exhaustive search, `M^k`.
    pub oracle_evaluations: u128,
}

/// `(√M)^{outer reals} · Σ_g (√M)^{|g|}` over first-layer groups `g`.
pub fn complexity_account(design: &StbcDesign, constellation: &Constellation) -> ComplexityAccount {
    let side = constellation.side() as u128;
    let total = design.weights().len();
    let outer = total - design.layer_range(0).len();
    let groups: Vec<usize> = design.layout().groups_in_layer(0).map(Vec::len).collect();
    let inner: u128 = groups.iter().map(|&g| side.pow(g as u32)).sum();
    let largest = groups.iter().copied().max().unwrap_or(0);
    ComplexityAccount {
        evaluations: side.saturating_pow(outer as u32).saturating_mul(inner),
        order_exponent: (outer + largest) as f64 / 2.0,
        oracle_evaluations: side.saturating_pow(total as u32),
    }
}

/// Which decoder a simulation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecoderKind {
    Oracle,
    Group,
    Conditional,
    /// Group decoding for one layer, conditional decoding otherwise.
    #[default]
    Auto,
}

impl DecoderKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "oracle" | "ml" => Ok(Self::Oracle),
            "group" => Ok(Self::Group),
            "conditional" => Ok(Self::Conditional),
            "auto" => Ok(Self::Auto),
            other => Err(StbcError::Config(format!("unknown decoder '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Group => "group",
            Self::Conditional => "conditional",
            Self::Auto => "auto",
        }
    }

    pub fn resolve(self, design: &StbcDesign) -> Self {
        match self {
            Self::Auto if design.layers() == 1 => Self::Group,
            Self::Auto => Self::Conditional,
            other => other,
        }
    }

    /// Predicted evaluations per codeword.
    pub fn predicted_evaluations(self, design: &StbcDesign, constellation: &Constellation) -> u128 {
        let account = complexity_account(design, constellation);
        match self.resolve(design) {
            Self::Oracle => account.oracle_evaluations,
            _ => account.evaluations,
        }
    }
}

pub fn decode(
    kind: DecoderKind,
    y: &ComplexMatrix,
    h: &ComplexMatrix,
    encoder: &Encoder,
    amplitude: f64,
) -> Result<DecodeResult> {
    match kind.resolve(encoder.design()) {
        DecoderKind::Oracle => ml_oracle(y, h, encoder, amplitude),
        DecoderKind::Group => group_decode(y, h, encoder, amplitude),
        _ => conditional_decode(y, h, encoder, amplitude, ConditionalOptions::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channel;
    use crate::clifford::{build_generators, SignChoice};
    use crate::design::{build_rate1_4group, build_rate1_from, extend_full_rate};
    use crate::gain::builtin_rotation;
    use crate::rng::{complex_gaussian, stream_rng};
    use rand::Rng;

    fn qam4() -> Constellation {
        Constellation::qam(4).unwrap()
    }

    #[test]
    fn constellations_have_unit_power() {
        for m in [4, 16, 64, 256] {
            let c = Constellation::qam(m).unwrap();
            assert!((c.mean_power() - 1.0).abs() < 1e-12);
            assert_eq!(c.points().len(), m);
        }
        assert!(Constellation::qam(8).is_err());
        assert_eq!(Constellation::parse("16qam").unwrap().size(), 16);
        assert_eq!(Constellation::parse("4-QAM").unwrap().label(), "4-QAM");
        assert!(Constellation::parse("bpsk").is_err());
        let c = qam4();
        let l = 0.5f64.sqrt();
        assert_eq!(c.levels(), &[-l, l]);
        assert_eq!(c.points()[1], Complex64::new(-l, l));
    }

    fn silver() -> Encoder {
        let set = build_generators(1, SignChoice::Plus).unwrap();
        let d =
            extend_full_rate(&build_rate1_from(&set), 2, &set, Complex64::new(1.0, 0.0)).unwrap();
        Encoder::new(&d, &builtin_rotation(1).unwrap(), &qam4()).unwrap()
    }

    fn transmit(
        enc: &Encoder,
        snr: f64,
        seed: u64,
    ) -> (ComplexMatrix, ComplexMatrix, Vec<usize>, f64) {
        let d = enc.design();
        let mut rng = stream_rng(seed, 0);
        let h = sample_channel(d.n_t(), 2, &mut rng);
        let side = enc.constellation().side();
        let info: Vec<usize> = (0..enc.len()).map(|_| rng.random_range(0..side)).collect();
        let amp = transmit_amplitude(snr, d);
        let s = enc.encode_indices(&info);
        let x = codeword(d, &s).unwrap();
        let mut y = (&h * &x).scale(Complex64::new(amp, 0.0));
        let noise = ComplexMatrix::from_fn(y.rows(), y.cols(), |_, _| complex_gaussian(&mut rng));
        y = &y + &noise;
        (y, h, info, amp)
    }

    #[test]
    fn noiseless_oracle_recovers_and_counts() {
        let enc = silver();
        let (_, h, info, amp) = transmit(&enc, 10.0, 1);
        let x = codeword(enc.design(), &enc.encode_indices(&info)).unwrap();
        let y = (&h * &x).scale(Complex64::new(amp, 0.0));
        let r = ml_oracle(&y, &h, &enc, amp).unwrap();
        assert_eq!(r.info, info);
        assert!(r.metric < 1e-20);
        assert_eq!(r.metric_evaluations, 256);
    }

    #[test]
    fn conditional_matches_oracle_on_silver() {
        let enc = silver();
        for seed in 0..50 {
            let (y, h, _, amp) = transmit(&enc, 3.0, seed);
            let a = ml_oracle(&y, &h, &enc, amp).unwrap();
            let b = conditional_decode(&y, &h, &enc, amp, ConditionalOptions::default()).unwrap();
            let c = conditional_decode(
                &y,
                &h,
                &enc,
                amp,
                ConditionalOptions {
                    prune: true,
                    budget: None,
                },
            )
            .unwrap();
            assert_eq!(a.info, b.info);
            assert_eq!(b.info, c.info);
            assert!((a.metric - b.metric).abs() < 1e-9);
            assert_eq!(
                b.metric_evaluations,
                complexity_account(enc.design(), &qam4()).evaluations
            );
            assert!(c.metric_evaluations <= b.metric_evaluations);
        }
    }

    #[test]
    fn group_matches_oracle_on_rate1() {
        let d = build_rate1_4group(2).unwrap();
        let enc = Encoder::new(&d, &builtin_rotation(2).unwrap(), &qam4()).unwrap();
        for seed in 0..50 {
            let (y, h, _, amp) = transmit(&enc, 2.0, seed);
            let a = ml_oracle(&y, &h, &enc, amp).unwrap();
            let b = group_decode(&y, &h, &enc, amp).unwrap();
            assert_eq!(a.info, b.info);
            assert!((a.metric - b.metric).abs() < 1e-9);
            assert_eq!(b.metric_evaluations, 16);
        }
    }

    #[test]
    fn group_decode_rejects_layered() {
        let enc = silver();
        let (y, h, _, amp) = transmit(&enc, 3.0, 0);
        assert!(matches!(
            group_decode(&y, &h, &enc, amp),
            Err(StbcError::NotGroupDecodable(_))
        ));
    }

    #[test]
    fn complexity_examples() {
        let c4 = qam4();
        let r1 = build_rate1_4group(3).unwrap();
        assert_eq!(complexity_account(&r1, &c4).evaluations, 64);
        let set = build_generators(3, SignChoice::Plus).unwrap();
        let r2 =
            extend_full_rate(&build_rate1_from(&set), 2, &set, Complex64::new(1.0, 0.0)).unwrap();
        let acc = complexity_account(&r2, &c4);
        assert_eq!(acc.order_exponent, 10.0);
        assert_eq!(acc.evaluations, 4u128.pow(8) * 4 * 4u128.pow(2));
        let a1 = build_rate1_4group(1).unwrap();
        let c16 = Constellation::qam(16).unwrap();
        assert_eq!(complexity_account(&a1, &c16).evaluations, 4 * 4);
        assert_eq!(complexity_account(&a1, &c16).order_exponent, 0.5);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let d = build_rate1_4group(3).unwrap();
        let enc = Encoder::unrotated(&d, &Constellation::qam(16).unwrap()).unwrap();
        let h = ComplexMatrix::identity(8);
        let y = ComplexMatrix::zeros(8, 8);
        assert!(matches!(
            ml_oracle(&y, &h, &enc, 1.0),
            Err(StbcError::TooLarge { .. })
        ));
    }
}
