//! Rate-1 4-group decodable designs and their full-rate layered extension.
//!
//! A design is an ordered list of weight matrices `A_1..A_2k` (codeword
//! `S = Σ s_i A_i`) together with a partition of the weights into decoding
//! groups. Weights are stored layer by layer, and within a layer group by
//! group; the R-matrix block pattern and the decoders rely on that order.

use std::fmt::Write as _;
use std::ops::Range;

use num_complex::Complex64;

use crate::clifford::{
    build_generators, power_set_products, product_of, CliffordSet, SignChoice, SignedProduct,
    UnitScalar, ALGEBRA_TOL,
};
use crate::error::{Result, StbcError};
use crate::linalg::{dot, norm, tilde_vec, vec_columns, ComplexMatrix, RealMatrix};

/// Relative residual below which a new generator column counts as dependent.
pub const INDEPENDENCE_TOL: f64 = 1e-9;

/// Partition of weight indices into decoding groups, each tagged with its
/// layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    groups: Vec<Vec<usize>>,
    group_layer: Vec<usize>,
}

impl GroupLayout {
    /// Validates that `groups` covers `0..total` exactly once.
    pub fn new(groups: Vec<Vec<usize>>, group_layer: Vec<usize>, total: usize) -> Result<Self> {
        if groups.len() != group_layer.len() {
            return Err(StbcError::StructureError(
                "every group needs a layer".into(),
            ));
        }
        let mut seen = vec![false; total];
        for &i in groups.iter().flatten() {
            if i >= total || seen[i] {
                return Err(StbcError::StructureError(format!(
                    "group layout is not a partition of 0..{total} (index {i})"
                )));
            }
            seen[i] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(StbcError::StructureError(format!(
                "weight {i} is in no group"
            )));
        }
        Ok(Self {
            groups,
            group_layer,
        })
    }

    /// `count` consecutive groups of `size` weights per layer.
    pub fn uniform(layers: usize, groups_per_layer: usize, size: usize) -> Self {
        let g = layers * groups_per_layer;
        Self {
            groups: (0..g)
                .map(|q| (q * size..(q + 1) * size).collect())
                .collect(),
            group_layer: (0..g).map(|q| q / groups_per_layer).collect(),
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn layer_of_group(&self, g: usize) -> usize {
        self.group_layer[g]
    }

    /// Groups of one layer, in order.
    pub fn groups_in_layer(&self, layer: usize) -> impl Iterator<Item = &Vec<usize>> {
        self.groups
            .iter()
            .zip(&self.group_layer)
            .filter(move |(_, &l)| l == layer)
            .map(|(g, _)| g)
    }

    pub fn group_of(&self, weight: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(&weight))
    }

    /// True when the groups are consecutive runs of `0..total` in order.
    pub fn is_contiguous(&self) -> bool {
        let mut next = 0;
        for g in &self.groups {
            for &i in g {
                if i != next {
                    return false;
                }
                next += 1;
            }
        }
        true
    }
}

/// How a design was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub a: Option<u32>,
    pub sign: SignChoice,
    pub layer_scalar: Complex64,
    /// Label of each layer's left multiplier (`I` for the base layer).
    pub multipliers: Vec<String>,
}

impl Default for Provenance {
    fn default() -> Self {
        Self {
            a: None,
            sign: SignChoice::Plus,
            layer_scalar: Complex64::new(1.0, 0.0),
            multipliers: Vec::new(),
        }
    }
}

/// A square linear dispersion code.
#[derive(Debug, Clone)]
pub struct StbcDesign {
    n_t: usize,
    t: usize,
    weights: Vec<ComplexMatrix>,
    labels: Vec<String>,
    layout: GroupLayout,
    layers: usize,
    provenance: Provenance,
}

impl StbcDesign {
    pub fn new(
        n_t: usize,
        weights: Vec<ComplexMatrix>,
        labels: Vec<String>,
        layout: GroupLayout,
        layers: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if weights.is_empty() || !weights.len().is_multiple_of(2) {
            return Err(StbcError::StructureError(format!(
                "need an even, non-zero number of weights, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.rows() != n_t || w.cols() != n_t) {
            return Err(StbcError::DimensionMismatch(format!(
                "weight is {}x{}, expected {n_t}x{n_t}",
                w.rows(),
                w.cols()
            )));
        }
        if labels.len() != weights.len() {
            return Err(StbcError::StructureError("one label per weight".into()));
        }
        if layers == 0 || !weights.len().is_multiple_of(layers) {
            return Err(StbcError::StructureError(format!(
                "{} weights cannot form {layers} equal layers",
                weights.len()
            )));
        }
        let per_layer = weights.len() / layers;
        for (g, members) in layout.groups().iter().enumerate() {
            let layer = layout.layer_of_group(g);
            if layer >= layers || members.iter().any(|&i| i / per_layer != layer) {
                return Err(StbcError::StructureError(format!(
                    "group {g} crosses its layer boundary"
                )));
            }
        }
        Ok(Self {
            n_t,
            t: n_t,
            weights,
            labels,
            layout,
            layers,
            provenance,
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Channel uses per codeword (square designs: `T = n_t`).
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of complex symbols (`2k` real symbols).
    pub fn k(&self) -> usize {
        self.weights.len() / 2
    }

    /// Complex symbols per channel use.
    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.t as f64
    }

    pub fn weights(&self) -> &[ComplexMatrix] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layout(&self) -> &GroupLayout {
        &self.layout
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn weights_per_layer(&self) -> usize {
        self.weights.len() / self.layers
    }

    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        let per = self.weights_per_layer();
        layer * per..(layer + 1) * per
    }

    /// `Σ ‖A_i‖_F²`.
    pub fn total_weight_energy(&self) -> f64 {
        self.weights.iter().map(ComplexMatrix::fro_norm_sq).sum()
    }

    /// Amplitude factor giving `E‖S‖² = n_t T` for i.i.d. zero-mean real
    /// symbols of variance 1/2 (unit-energy complex symbols).
    pub fn energy_scale(&self) -> f64 {
        (2.0 * (self.n_t * self.t) as f64 / self.total_weight_energy()).sqrt()
    }

    /// Copy of the design with every weight replaced.
    pub fn with_weights(&self, weights: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        Self::new(
            self.n_t,
            weights,
            labels,
            self.layout.clone(),
            self.layers,
            self.provenance.clone(),
        )
    }

    /// The first layer as a rate-1 design of its own.
    pub fn base_layer(&self) -> Result<Self> {
        let range = self.layer_range(0);
        let groups: Vec<Vec<usize>> = self.layout.groups_in_layer(0).cloned().collect();
        let n = groups.len();
        let layout = GroupLayout::new(groups, vec![0; n], range.len())?;
        let mut provenance = self.provenance.clone();
        provenance.multipliers.truncate(1);
        Self::new(
            self.n_t,
            self.weights[range.clone()].to_vec(),
            self.labels[range].to_vec(),
            layout,
            1,
            provenance,
        )
    }
}

/// The symbolic weights of the rate-1 construction: first-group
/// matrices `ℙ(𝒮)` followed by `B_i · F_m` for the three headers.
pub fn rate1_products(set: &CliffordSet) -> Vec<SignedProduct> {
    let a = set.a() as usize;
    let mut s: Vec<SignedProduct> = (2..a)
        .map(|m| product_of(set, &[2 * m, 2 * m + 1], UnitScalar::J).expect("valid indices"))
        .collect();
    if a >= 2 {
        s.push(product_of(set, &[1, 2, 3], UnitScalar::ONE).expect("valid indices"));
    }
    let group_one = power_set_products(set, &s);
    let headers = headers_of(set);
    let mut out = group_one.clone();
    for h in &headers {
        out.extend(group_one.iter().map(|b| b.times(h)));
    }
    out
}

/// `F_1, F_2, F_3` as signed products. At `a = 1` the third header is
/// `P2`, which equals `±F_1F_2` depending on the sign choice.
fn headers_of(set: &CliffordSet) -> [SignedProduct; 3] {
    let f = |i| product_of(set, &[i], UnitScalar::ONE).expect("valid index");
    let third = if set.a() == 1 {
        let scalar = match set.sign() {
            SignChoice::Plus => UnitScalar::ONE,
            SignChoice::Minus => UnitScalar::MINUS_ONE,
        };
        let p = product_of(set, &[1, 2], scalar).expect("valid indices");
        debug_assert!(p.matrix.max_abs_diff(set.third_anticommuting()[2]) < ALGEBRA_TOL);
        p
    } else {
        f(3)
    };
    [f(1), f(2), third]
}

/// Rate-1, 4-group decodable design for `n_t = 2^a` with the default sign.
pub fn build_rate1_4group(a: u32) -> Result<StbcDesign> {
    let set = build_generators(a, SignChoice::Plus)?;
    Ok(build_rate1_from(&set))
}

/// Rate-1, 4-group decodable design from a given generator set.
pub fn build_rate1_from(set: &CliffordSet) -> StbcDesign {
    let products = rate1_products(set);
    let n = set.n();
    let size = n / 2;
    let labels = products.iter().map(SignedProduct::label).collect();
    let weights = products.into_iter().map(|p| p.matrix).collect();
    let provenance = Provenance {
        a: Some(set.a()),
        sign: set.sign(),
        layer_scalar: Complex64::new(1.0, 0.0),
        multipliers: vec!["I".into()],
    };
    StbcDesign::new(
        n,
        weights,
        labels,
        GroupLayout::uniform(1, 4, size),
        1,
        provenance,
    )
    .expect("construction is well formed")
}

/// Layer multipliers in selection order: products of the even generators
/// `F_4, F_6, ..., F_2a` by subset size, then lexicographically (identity
/// first). These are one representative per coset of the first layer's
/// monomials, so the layers they produce cannot overlap.
pub fn layer_multipliers(set: &CliffordSet) -> Vec<SignedProduct> {
    let evens: Vec<usize> = (2..=set.a() as usize).map(|k| 2 * k).collect();
    let mut subsets: Vec<Vec<usize>> = (0..1usize << evens.len())
        .map(|mask| {
            evens
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect()
        })
        .collect();
    subsets.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    subsets
        .iter()
        .map(|idx| product_of(set, idx, UnitScalar::ONE).expect("ascending"))
        .collect()
}

/// Stacks `n_layers` rate-1 layers into a rate-`n_layers` design.
///
/// Layer `ℓ` is `multiplier_ℓ · 𝒢_1`. The first `n_t/2` multipliers come
/// from [`layer_multipliers`]; beyond that the same sequence is reused
/// times `j`. Every layer after the first is additionally scaled by
/// `layer_scalar`. Independence over ℝ is re-checked numerically as each
/// layer is appended.
pub fn extend_full_rate(
    base: &StbcDesign,
    n_layers: usize,
    set: &CliffordSet,
    layer_scalar: Complex64,
) -> Result<StbcDesign> {
    let n = set.n();
    if base.n_t() != n || base.layers() != 1 {
        return Err(StbcError::StructureError(
            "extension needs a single-layer base matching the generator set".into(),
        ));
    }
    if n_layers == 0 || n_layers > n {
        return Err(StbcError::StructureError(format!(
            "layer count must be in 1..={n}, got {n_layers}"
        )));
    }
    if (layer_scalar.norm() - 1.0).abs() > 1e-12 {
        return Err(StbcError::StructureError(
            "layer scalar must have unit modulus".into(),
        ));
    }
    let products = rate1_products(set);
    let matches = products.len() == base.weights().len()
        && products
            .iter()
            .zip(base.weights())
            .all(|(p, w)| p.matrix.max_abs_diff(w) < ALGEBRA_TOL);
    if !matches {
        return Err(StbcError::StructureError(
            "base is not the rate-1 construction of this generator set".into(),
        ));
    }

    let from_f = layer_multipliers(set);
    let half = from_f.len();
    let multiplier = |l: usize| {
        if l < half {
            from_f[l].clone()
        } else {
            from_f[l - half].scaled(UnitScalar::J)
        }
    };

    let per = products.len();
    let mut weights = Vec::with_capacity(per * n_layers);
    let mut labels = Vec::with_capacity(per * n_layers);
    let mut mult_labels = Vec::with_capacity(n_layers);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for l in 0..n_layers {
        let m = multiplier(l);
        let scalar = if l == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            layer_scalar
        };
        let prefix = scalar_prefix(scalar);
        for p in &products {
            let w = m.times(p);
            weights.push(w.matrix.scale(scalar));
            labels.push(format!("{prefix}{}", w.label()));
        }
        mult_labels.push(format!("{prefix}{}", m.label()));
        let start = weights.len() - per;
        for w in &weights[start..] {
            if !extend_basis(&mut basis, tilde_vec(&vec_columns(w))) {
                return Err(StbcError::DependentExtension {
                    layer: l,
                    rank: basis.len(),
                    expected: weights.len(),
                });
            }
        }
    }
    let provenance = Provenance {
        a: Some(set.a()),
        sign: set.sign(),
        layer_scalar,
        multipliers: mult_labels,
    };
    StbcDesign::new(
        n,
        weights,
        labels,
        GroupLayout::uniform(n_layers, 4, n / 2),
        n_layers,
        provenance,
    )
}

fn scalar_prefix(s: Complex64) -> String {
    if (s - Complex64::new(1.0, 0.0)).norm() < 1e-15 {
        String::new()
    } else {
        format!("e^(j{:.6})·", s.arg())
    }
}

/// Gram-Schmidt step: appends `v` to the orthonormal `basis` unless it is
/// dependent.
fn extend_basis(basis: &mut Vec<Vec<f64>>, mut v: Vec<f64>) -> bool {
    let n0 = norm(&v);
    for _ in 0..2 {
        for q in basis.iter() {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
    let nv = norm(&v);
    if n0 == 0.0 || nv <= INDEPENDENCE_TOL * n0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    basis.push(v);
    true
}

/// Rank over ℝ of the weights (rank of the generator matrix).
pub fn real_rank(design: &StbcDesign) -> usize {
    let mut basis = Vec::new();
    for w in design.weights() {
        extend_basis(&mut basis, tilde_vec(&vec_columns(w)));
    }
    basis.len()
}

/// `S = Σ s_i A_i`.
pub fn codeword(design: &StbcDesign, s: &[f64]) -> Result<ComplexMatrix> {
    if s.len() != design.weights().len() {
        return Err(StbcError::DimensionMismatch(format!(
            "design has {} weights, symbol vector has {} entries",
            design.weights().len(),
            s.len()
        )));
    }
    let n = design.n_t();
    let mut out = ComplexMatrix::zeros(n, design.t());
    for (w, &si) in design.weights().iter().zip(s) {
        if si != 0.0 {
            out = &out + &w.scale(Complex64::new(si, 0.0));
        }
    }
    Ok(out)
}

/// `G` with `tilde(vec(S)) = G s`: column `i` is `tilde(vec(A_i))`.
pub fn generator_matrix(design: &StbcDesign) -> RealMatrix {
    let cols: Vec<Vec<f64>> = design
        .weights()
        .iter()
        .map(|w| tilde_vec(&vec_columns(w)))
        .collect();
    RealMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
}

/// `A_i A_jᴴ + A_j A_iᴴ`, whose vanishing is the cross-group decoupling
/// condition.
pub fn hurwitz_radon_residual(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let ab = a * &b.adjoint();
    let ba = b * &a.adjoint();
    (&ab + &ba).max_abs()
}

/// One condition of the group-decodability check.
#[derive(Debug, Clone)]
pub struct ConditionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub max_residual: f64,
    /// First offending weight pair (0-based indices).
    pub witness: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct GroupConditionReport {
    pub conditions: Vec<ConditionCheck>,
}

impl GroupConditionReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.conditions.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.conditions {
            let _ = write!(
                s,
                "{:<5} {:<4} max_residual={:.3e}",
                c.id,
                if c.passed { "PASS" } else { "FAIL" },
                c.max_residual
            );
            if let Some((i, j)) = c.witness {
                let _ = write!(s, " witness=(A{}, A{})", i + 1, j + 1);
            }
            let _ = writeln!(s, "  {}", c.description);
        }
        s
    }
}

struct Tally {
    check: ConditionCheck,
}

impl Tally {
    fn new(id: &'static str, description: &'static str) -> Self {
        Self {
            check: ConditionCheck {
                id,
                description,
                passed: true,
                max_residual: 0.0,
                witness: None,
            },
        }
    }

    fn record(&mut self, residual: f64, i: usize, j: usize) {
        self.check.max_residual = self.check.max_residual.max(residual);
        if residual > ALGEBRA_TOL && self.check.passed {
            self.check.passed = false;
            self.check.witness = Some((i, j));
        }
    }
}

/// Checks the six sufficient conditions for g-group decodability on the
/// first layer, plus the cross-group condition `A_iA_jᴴ + A_jA_iᴴ = 0`
/// between every pair of groups sharing a layer.
///
/// Conditions 3 and 4 are checked as commutation (`A_iA_j = A_jA_i`).
pub fn verify_group_conditions(design: &StbcDesign) -> GroupConditionReport {
    let w = design.weights();
    let n = design.n_t();
    let id = ComplexMatrix::identity(n);
    let minus_id = -&id;
    let layer0: Vec<&Vec<usize>> = design.layout().groups_in_layer(0).collect();
    let first = layer0[0];
    let headers: Vec<usize> = layer0[1..].iter().map(|g| g[0]).collect();

    let mut conditions = Vec::new();

    let mut c0 = Tally::new("C0", "equal group sizes, A_1 = I");
    c0.record(w[first[0]].max_abs_diff(&id), first[0], first[0]);
    for (q, g) in layer0.iter().enumerate() {
        if g.len() != first.len() {
            c0.check.passed = false;
            c0.check.witness.get_or_insert((g[0], q));
        }
    }
    let sizes_ok = c0.check.passed || layer0.iter().all(|g| g.len() == first.len());
    conditions.push(c0.check);

    let mut c1 = Tally::new("C1", "first-group weights square to I");
    for &i in first {
        c1.record((&w[i] * &w[i]).max_abs_diff(&id), i, i);
    }
    conditions.push(c1.check);

    let mut c2 = Tally::new("C2", "group headers square to -I");
    for &h in &headers {
        c2.record((&w[h] * &w[h]).max_abs_diff(&minus_id), h, h);
    }
    conditions.push(c2.check);

    let commutator = |i: usize, j: usize| (&w[i] * &w[j]).max_abs_diff(&(&w[j] * &w[i]));
    let anticommutator = |i: usize, j: usize| (&(&w[i] * &w[j]) + &(&w[j] * &w[i])).max_abs();

    let mut c3 = Tally::new("C3", "first-group weights commute pairwise");
    for (x, &i) in first.iter().enumerate() {
        for &j in &first[x + 1..] {
            c3.record(commutator(i, j), i, j);
        }
    }
    conditions.push(c3.check);

    let mut c4 = Tally::new("C4", "first-group weights commute with every header");
    for &i in first {
        for &h in &headers {
            c4.record(commutator(i, h), i, h);
        }
    }
    conditions.push(c4.check);

    let mut c5 = Tally::new("C5", "headers anticommute pairwise");
    for (x, &h1) in headers.iter().enumerate() {
        for &h2 in &headers[x + 1..] {
            c5.record(anticommutator(h1, h2), h1, h2);
        }
    }
    conditions.push(c5.check);

    let mut c6 = Tally::new("C6", "A_(mK+i) = A_i A_(mK+1) (row generation)");
    if sizes_ok {
        for g in &layer0[1..] {
            for (i, &member) in g.iter().enumerate() {
                let want = &w[first[i]] * &w[g[0]];
                c6.record(w[member].max_abs_diff(&want), member, first[i]);
            }
        }
    } else {
        c6.check.passed = false;
    }
    conditions.push(c6.check);

    let mut hr = Tally::new(
        "D5",
        "cross-group A_iA_j^H + A_jA_i^H = 0 within each layer",
    );
    let groups = design.layout().groups();
    for (p, gp) in groups.iter().enumerate() {
        for (q, gq) in groups.iter().enumerate().skip(p + 1) {
            if design.layout().layer_of_group(p) != design.layout().layer_of_group(q) {
                continue;
            }
            for &i in gp {
                for &j in gq {
                    hr.record(hurwitz_radon_residual(&w[i], &w[j]), i, j);
                }
            }
        }
    }
    conditions.push(hr.check);

    GroupConditionReport { conditions }
}

/// Checks only the cross-group condition, per layer. Cheaper than
/// [`verify_group_conditions`]; used to gate the group decoders.
pub fn is_group_decodable(design: &StbcDesign) -> bool {
    let w = design.weights();
    let layout = design.layout();
    let groups = layout.groups();
    groups.iter().enumerate().all(|(p, gp)| {
        groups.iter().enumerate().skip(p + 1).all(|(q, gq)| {
            layout.layer_of_group(p) != layout.layer_of_group(q)
                || gp.iter().all(|&i| {
                    gq.iter()
                        .all(|&j| hurwitz_radon_residual(&w[i], &w[j]) < ALGEBRA_TOL)
                })
        })
    })
}

/// Product closure of the first group: every product of two first-group
/// weights is `±` another first-group weight. Returns the first failing
/// pair.
pub fn first_group_closure(design: &StbcDesign) -> std::result::Result<(), (usize, usize)> {
    let w = design.weights();
    let first = &design.layout().groups()[0];
    for &i in first {
        for &j in first {
            let p = &w[i] * &w[j];
            let closed = first.iter().any(|&k| {
                p.max_abs_diff(&w[k]) < ALGEBRA_TOL || p.max_abs_diff(&-&w[k]) < ALGEBRA_TOL
            });
            if !closed {
                return Err((i, j));
            }
        }
    }
    Ok(())
}

const DESIGN_MAGIC: &str = "stbc-design v1";

impl StbcDesign {
    /// Plain-text design file: header fields, the group layout and each
    /// weight matrix in the matrix text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{DESIGN_MAGIC}");
        let _ = writeln!(s, "n_t {}", self.n_t);
        let _ = writeln!(s, "T {}", self.t);
        let _ = writeln!(s, "layers {}", self.layers);
        let p = &self.provenance;
        if let Some(a) = p.a {
            let _ = writeln!(s, "provenance a {a}");
        }
        let sign = match p.sign {
            SignChoice::Plus => "+1",
            SignChoice::Minus => "-1",
        };
        let _ = writeln!(s, "provenance sign {sign}");
        let mut buf = String::new();
        crate::linalg::Scalar::write_entry(p.layer_scalar, &mut buf);
        let _ = writeln!(s, "provenance layer_scalar {buf}");
        for m in &p.multipliers {
            let _ = writeln!(s, "provenance multiplier {m}");
        }
        let _ = writeln!(s, "groups {}", self.layout.group_count());
        for (g, members) in self.layout.groups().iter().enumerate() {
            let list: Vec<String> = members.iter().map(usize::to_string).collect();
            let _ = writeln!(
                s,
                "group {g} layer {} : {}",
                self.layout.layer_of_group(g),
                list.join(" ")
            );
        }
        let _ = writeln!(s, "weights {}", self.weights.len());
        for (i, (w, label)) in self.weights.iter().zip(&self.labels).enumerate() {
            let _ = writeln!(s, "weight {i} {label}");
            s.push_str(&w.to_text());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let err = |line: usize, message: String| StbcError::Parse { line, message };
        let mut it = lines.into_iter().peekable();
        match it.next() {
            Some((_, l)) if l == DESIGN_MAGIC => {}
            Some((n, l)) => return Err(err(n, format!("expected '{DESIGN_MAGIC}', found '{l}'"))),
            None => return Err(err(0, "empty design file".into())),
        }
        let mut n_t = None;
        let mut t = None;
        let mut layers = None;
        let mut provenance = Provenance::default();
        let mut groups = Vec::new();
        let mut group_layer = Vec::new();
        let mut weights = Vec::new();
        let mut labels = Vec::new();
        while let Some((ln, line)) = it.next() {
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(ln, format!("bad number '{v}'")))
            };
            match key {
                "n_t" => n_t = Some(num(rest)?),
                "T" => t = Some(num(rest)?),
                "layers" => layers = Some(num(rest)?),
                "groups" | "weights" => {}
                "provenance" => {
                    let (field, value) = rest.split_once(' ').unwrap_or((rest, ""));
                    match field {
                        "a" => provenance.a = Some(num(value)? as u32),
                        "sign" => {
                            provenance.sign = match value {
                                "+1" | "1" => SignChoice::Plus,
                                "-1" => SignChoice::Minus,
                                _ => return Err(err(ln, format!("bad sign '{value}'"))),
                            }
                        }
                        "layer_scalar" => {
                            provenance.layer_scalar =
                                <Complex64 as crate::linalg::Scalar>::parse_entry(value)
                                    .ok_or_else(|| err(ln, format!("bad scalar '{value}'")))?
                        }
                        "multiplier" => provenance.multipliers.push(value.to_string()),
                        _ => return Err(err(ln, format!("unknown provenance field '{field}'"))),
                    }
                }
                "group" => {
                    let (head, members) = rest
                        .split_once(':')
                        .ok_or_else(|| err(ln, "group line needs ':'".into()))?;
                    let head: Vec<&str> = head.split_whitespace().collect();
                    if head.len() != 3 || head[1] != "layer" {
                        return Err(err(ln, "expected 'group <g> layer <l> : ...'".into()));
                    }
                    group_layer.push(num(head[2])?);
                    groups.push(
                        members
                            .split_whitespace()
                            .map(num)
                            .collect::<Result<Vec<usize>>>()?,
                    );
                }
                "weight" => {
                    let n = n_t.ok_or_else(|| err(ln, "n_t must precede weights".into()))?;
                    let (_, label) = rest.split_once(' ').unwrap_or((rest, ""));
                    labels.push(label.to_string());
                    let mut body = String::new();
                    for _ in 0..n {
                        let (_, row) = it
                            .next()
                            .ok_or_else(|| err(ln, "truncated weight matrix".into()))?;
                        body.push_str(row);
                        body.push('\n');
                    }
                    weights.push(ComplexMatrix::from_text(&body).map_err(|e| match e {
                        StbcError::Parse { message, .. } => err(ln, message),
                        other => other,
                    })?);
                }
                _ => return Err(err(ln, format!("unknown key '{key}'"))),
            }
        }
        let n_t = n_t.ok_or_else(|| err(0, "missing n_t".into()))?;
        if let Some(t) = t {
            if t != n_t {
                return Err(StbcError::StructureError(format!(
                    "only square designs are supported (n_t={n_t}, T={t})"
                )));
            }
        }
        let layout = GroupLayout::new(groups, group_layer, weights.len())?;
        Self::new(
            n_t,
            weights,
            labels,
            layout,
            layers.unwrap_or(1),
            provenance,
        )
    }
}
