//! Pairwise-anticommuting unitary generators for `n = 2^a` and the
//! product-set machinery built on them.
//!
//! The generators are Kronecker words in
//!
//! ```text
//! P1 = [[0, 1], [-1, 0]],  P2 = [[0, j], [j, 0]],  P3 = diag(1, -1)
//! ```
//!
//! with `F_1 = ±j P3^{⊗a}`, `F_2k = I^{⊗(a-k)} ⊗ P1 ⊗ P3^{⊗(k-1)}` and
//! `F_2k+1 = I^{⊗(a-k)} ⊗ P2 ⊗ P3^{⊗(k-1)}`, giving `2a` matrices
//! `F_1..F_2a`. All entries lie in `{0, ±1, ±j}`.

use std::fmt;
use std::ops::Mul;

use num_complex::{Complex, Complex64};

use crate::error::{Result, StbcError};
use crate::linalg::{column_rank, kron, tilde_vec, vec_columns, ComplexMatrix, RealMatrix};

/// Tolerance used when certifying the algebra in floating point.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Largest supported `a` (n = 32).
pub const MAX_A: u32 = 5;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn p1() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c(1., 0.),
        (1, 0) => c(-1., 0.),
        _ => c(0., 0.),
    })
}

pub fn p2() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |i, j| if i != j { c(0., 1.) } else { c(0., 0.) })
}

pub fn p3() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[c(1., 0.), c(-1., 0.)])
}

/// `A ⊗ A ⊗ ... ⊗ A` (`m` factors); the empty power is `[1]`.
pub fn kron_power(a: &ComplexMatrix, m: u32) -> ComplexMatrix {
    (0..m).fold(ComplexMatrix::identity(1), |acc, _| kron(&acc, a))
}

/// An element of `{1, j, -1, -j}`, stored as the exponent of `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct UnitScalar(u8);

impl UnitScalar {
    pub const ONE: Self = Self(0);
    pub const J: Self = Self(1);
    pub const MINUS_ONE: Self = Self(2);
    pub const MINUS_J: Self = Self(3);

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => c(1., 0.),
            1 => c(0., 1.),
            2 => c(-1., 0.),
            _ => c(0., -1.),
        }
    }

    pub fn is_real(self) -> bool {
        self.0.is_multiple_of(2)
    }
}

impl std::ops::Neg for UnitScalar {
    type Output = Self;

    fn neg(self) -> Self {
        Self((self.0 + 2) % 4)
    }
}

impl Mul for UnitScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for UnitScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            0 => "",
            1 => "j",
            2 => "-",
            _ => "-j",
        })
    }
}

/// The `±` in `F_1 = ±j P3^{⊗a}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignChoice {
    #[default]
    Plus,
    Minus,
}

impl SignChoice {
    pub fn value(self) -> f64 {
        match self {
            SignChoice::Plus => 1.0,
            SignChoice::Minus => -1.0,
        }
    }
}

/// The generators `F_1..F_2a` for one `a`.
#[derive(Debug, Clone)]
pub struct CliffordSet {
    a: u32,
    sign: SignChoice,
    generators: Vec<ComplexMatrix>,
    augmented: Option<ComplexMatrix>,
}

/// Builds `F_1..F_2a` for `n = 2^a`.
///
/// At `a = 1` the list only has two entries, while three mutually
/// anticommuting matrices are needed to head the decoding groups; the set
/// then also carries `P2` (the same Kronecker pattern with `k = a`), see
/// [`CliffordSet::third_anticommuting`].
pub fn build_generators(a: u32, sign: SignChoice) -> Result<CliffordSet> {
    if !(1..=MAX_A).contains(&a) {
        return Err(StbcError::UnsupportedSize(a));
    }
    let i2 = ComplexMatrix::identity(2);
    let mut generators = Vec::with_capacity(2 * a as usize);
    generators.push(kron_power(&p3(), a).scale(c(0., sign.value())));
    for k in 1..=a {
        let prefix = kron_power(&i2, a - k);
        let suffix = kron_power(&p3(), k - 1);
        generators.push(kron(&kron(&prefix, &p1()), &suffix));
        if 2 * k < 2 * a {
            generators.push(kron(&kron(&prefix, &p2()), &suffix));
        }
    }
    let augmented = (a == 1).then(p2);
    Ok(CliffordSet {
        a,
        sign,
        generators,
        augmented,
    })
}

impl CliffordSet {
    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn n(&self) -> usize {
        1 << self.a
    }

    pub fn sign(&self) -> SignChoice {
        self.sign
    }

    /// `F_1..F_2a`, in order.
    pub fn generators(&self) -> &[ComplexMatrix] {
        &self.generators
    }

    /// `F_i` with 1-based `i`.
    pub fn generator(&self, i: usize) -> &ComplexMatrix {
        &self.generators[i - 1]
    }

    /// The extra anticommuting matrix exposed at `a = 1`.
    pub fn augmented(&self) -> Option<&ComplexMatrix> {
        self.augmented.as_ref()
    }

    /// The three anticommuting, anti-Hermitian matrices that head the
    /// non-identity decoding groups: `F_1, F_2, F_3` (with `P2` standing in
    /// for `F_3` at `a = 1`).
    pub fn third_anticommuting(&self) -> [&ComplexMatrix; 3] {
        match &self.augmented {
            Some(p) => [&self.generators[0], &self.generators[1], p],
            None => [
                &self.generators[0],
                &self.generators[1],
                &self.generators[2],
            ],
        }
    }

    pub fn identity(&self) -> SignedProduct {
        SignedProduct {
            matrix: ComplexMatrix::identity(self.n()),
            indices: Vec::new(),
            scalar: UnitScalar::ONE,
        }
    }

    /// `F_1^λ1 ... F_2a^λ2a` for every `λ`, with `λ_1` the least significant
    /// bit (so the identity comes first).
    pub fn all_products(&self) -> Vec<SignedProduct> {
        let g = self.generators.len();
        (0..1usize << g)
            .map(|mask| {
                let idx: Vec<usize> = (0..g)
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| b + 1)
                    .collect();
                product_of(self, &idx, UnitScalar::ONE).expect("ascending indices")
            })
            .collect()
    }
}

/// `scalar · F_i1 F_i2 ... F_is` with ascending indices.
#[derive(Debug, Clone)]
pub struct SignedProduct {
    pub matrix: ComplexMatrix,
    pub indices: Vec<usize>,
    pub scalar: UnitScalar,
}

impl SignedProduct {
    /// Label such as `jF4F5` or `-F2F3`; the empty word is `I`.
    pub fn label(&self) -> String {
        if self.indices.is_empty() {
            return format!("{}I", self.scalar);
        }
        let word: String = self.indices.iter().map(|i| format!("F{i}")).collect();
        format!("{}{}", self.scalar, word)
    }

    pub fn scaled(&self, s: UnitScalar) -> Self {
        Self {
            matrix: self.matrix.scale(s.to_complex()),
            indices: self.indices.clone(),
            scalar: self.scalar * s,
        }
    }

    /// Product with the canonical (ascending) word and sign tracked
    /// symbolically; the matrix is the literal product.
    pub fn times(&self, rhs: &SignedProduct) -> SignedProduct {
        let (negate, indices) = merge_words(&self.indices, &rhs.indices);
        let mut scalar = self.scalar * rhs.scalar;
        if negate {
            scalar = -scalar;
        }
        SignedProduct {
            matrix: &self.matrix * &rhs.matrix,
            indices,
            scalar,
        }
    }
}

/// Reduces the word `a · b` of anticommuting generators squaring to `-I`
/// into ascending order. Returns whether the reduction flips the sign.
fn merge_words(a: &[usize], b: &[usize]) -> (bool, Vec<usize>) {
    let mut word = a.to_vec();
    let mut negate = false;
    for &k in b {
        let greater = word.iter().filter(|&&x| x > k).count();
        if greater % 2 == 1 {
            negate = !negate;
        }
        match word.binary_search(&k) {
            Ok(pos) => {
                word.remove(pos);
                negate = !negate;
            }
            Err(pos) => word.insert(pos, k),
        }
    }
    (negate, word)
}

/// `scalar · F_i1 ... F_is` multiplied out left to right.
pub fn product_of(
    set: &CliffordSet,
    indices: &[usize],
    scalar: UnitScalar,
) -> Result<SignedProduct> {
    let max = set.generators.len();
    let ascending = indices.windows(2).all(|w| w[0] < w[1]);
    if !ascending || indices.iter().any(|&i| i == 0 || i > max) {
        return Err(StbcError::BadIndexOrder {
            indices: indices.to_vec(),
            max,
        });
    }
    let mut m = ComplexMatrix::identity(set.n()).scale(scalar.to_complex());
    for &i in indices {
        m = &m * set.generator(i);
    }
    Ok(SignedProduct {
        matrix: m,
        indices: indices.to_vec(),
        scalar,
    })
}

/// Sign `σ` with `(F_i1 ... F_is)² = σ I` for `s` distinct generators.
pub fn subset_square_sign(s: usize) -> i32 {
    if (s * (s + 1) / 2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Whether products over index sets of sizes `r` and `s` sharing `p`
/// generators commute (they anticommute otherwise).
pub fn products_commute(r: usize, s: usize, p: usize) -> bool {
    debug_assert!(p <= r.min(s));
    (r % 2 == 1 && s % 2 == 1 && p % 2 == 1) || ((r * s).is_multiple_of(2) && p.is_multiple_of(2))
}

/// All `a1^λ1 ... am^λm`, `λ ∈ {0,1}^m`, with `λ_1` the least significant
/// bit; the identity comes first.
pub fn power_set_products(set: &CliffordSet, s: &[SignedProduct]) -> Vec<SignedProduct> {
    assert!(s.len() <= 12, "power set of more than 12 elements");
    (0..1usize << s.len())
        .map(|mask| {
            s.iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .fold(set.identity(), |acc, (_, x)| acc.times(x))
        })
        .collect()
}

/// Floating-point residuals of the defining relations.
#[derive(Debug, Clone)]
pub struct AlgebraReport {
    pub generators: usize,
    pub max_anti_hermitian: f64,
    pub max_unitary: f64,
    pub max_anticommutator: f64,
    /// The same relations re-checked in exact Gaussian-integer arithmetic.
    pub exact: bool,
}

impl AlgebraReport {
    pub fn passed(&self) -> bool {
        self.exact
            && self.max_anti_hermitian < ALGEBRA_TOL
            && self.max_unitary < ALGEBRA_TOL
            && self.max_anticommutator < ALGEBRA_TOL
    }
}

/// Checks `Gᴴ = -G`, `GᴴG = I` and pairwise anticommutation for every
/// generator (including the `a = 1` augmentation).
pub fn certify(set: &CliffordSet) -> AlgebraReport {
    let mut all: Vec<&ComplexMatrix> = set.generators.iter().collect();
    if let Some(p) = &set.augmented {
        all.push(p);
    }
    let id = ComplexMatrix::identity(set.n());
    let mut rep = AlgebraReport {
        generators: all.len(),
        max_anti_hermitian: 0.0,
        max_unitary: 0.0,
        max_anticommutator: 0.0,
        exact: true,
    };
    for (i, g) in all.iter().enumerate() {
        rep.max_anti_hermitian = rep.max_anti_hermitian.max(g.adjoint().max_abs_diff(&-*g));
        rep.max_unitary = rep.max_unitary.max((&g.adjoint() * g).max_abs_diff(&id));
        for h in &all[i + 1..] {
            let ac = &(*g * *h) + &(*h * *g);
            rep.max_anticommutator = rep.max_anticommutator.max(ac.max_abs());
        }
    }
    rep.exact = exact_anticommutation(&all);
    rep
}

/// Exact Gaussian-integer matrix, used to certify relations without
/// rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaussianMatrix {
    n: usize,
    data: Vec<Complex<i64>>,
}

impl GaussianMatrix {
    /// Converts a matrix whose entries are Gaussian integers; `None` if an
    /// entry is not.
    pub fn from_complex(m: &ComplexMatrix) -> Option<Self> {
        if !m.is_square() {
            return None;
        }
        let data = m
            .as_slice()
            .iter()
            .map(|z| {
                let (re, im) = (z.re.round(), z.im.round());
                (re == z.re && im == z.im).then(|| Complex::new(re as i64, im as i64))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { n: m.rows(), data })
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut data = vec![Complex::new(0, 0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex::new(0, 0) {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        Self { n, data }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == Complex::new(0, 0))
    }
}

fn exact_anticommutation(all: &[&ComplexMatrix]) -> bool {
    let Some(exact) = all
        .iter()
        .map(|m| GaussianMatrix::from_complex(m))
        .collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    let id = GaussianMatrix::from_complex(&ComplexMatrix::identity(all[0].rows())).unwrap();
    let minus_id = GaussianMatrix {
        n: id.n,
        data: id.data.iter().map(|z| -z).collect(),
    };
    exact.iter().enumerate().all(|(i, g)| {
        g.mul(g) == minus_id
            && exact[i + 1..]
                .iter()
                .all(|h| g.mul(h).add(&h.mul(g)).is_zero())
    })
}

/// Outcome of the exhaustive subset-product checks.
#[derive(Debug, Clone, Default)]
pub struct SubsetRuleReport {
    pub subsets: usize,
    pub square_mismatches: Vec<Vec<usize>>,
    pub commute_checked: usize,
    pub commute_mismatches: Vec<(Vec<usize>, Vec<usize>)>,
}

impl SubsetRuleReport {
    pub fn passed(&self) -> bool {
        self.square_mismatches.is_empty() && self.commute_mismatches.is_empty()
    }
}

/// Checks [`subset_square_sign`] and [`products_commute`] against literal
/// matrix products for every subset (pair) of the generators.
pub fn verify_subset_rules(set: &CliffordSet) -> SubsetRuleReport {
    let products = set.all_products();
    let id = ComplexMatrix::identity(set.n());
    let mut rep = SubsetRuleReport {
        subsets: products.len(),
        ..Default::default()
    };
    for p in &products {
        let sq = &p.matrix * &p.matrix;
        let want = id.scale(c(subset_square_sign(p.indices.len()) as f64, 0.));
        if !p.indices.is_empty() && sq.max_abs_diff(&want) > ALGEBRA_TOL {
            rep.square_mismatches.push(p.indices.clone());
        }
    }
    for x in &products {
        for y in &products {
            let overlap = x.indices.iter().filter(|i| y.indices.contains(i)).count();
            let xy = &x.matrix * &y.matrix;
            let yx = &y.matrix * &x.matrix;
            let commutes = xy.max_abs_diff(&yx) < ALGEBRA_TOL;
            let anticommutes = (&xy + &yx).max_abs() < ALGEBRA_TOL;
            let predicted = products_commute(x.indices.len(), y.indices.len(), overlap);
            let ok = if predicted { commutes } else { anticommutes };
            rep.commute_checked += 1;
            if !ok {
                rep.commute_mismatches
                    .push((x.indices.clone(), y.indices.clone()));
            }
        }
    }
    rep
}

/// Trace check over all `2^{2a}` products.
#[derive(Debug, Clone)]
pub struct TraceReport {
    pub checked: usize,
    pub identity_trace: Complex64,
    pub violations: Vec<(Vec<usize>, Complex64)>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Every non-identity product `F_1^λ1 ... F_2a^λ2a` must be traceless.
pub fn verify_traceless(set: &CliffordSet) -> TraceReport {
    let mut rep = TraceReport {
        checked: 0,
        identity_trace: c(0., 0.),
        violations: Vec::new(),
    };
    for p in set.all_products() {
        let t = p.matrix.trace().expect("square");
        if p.indices.is_empty() {
            rep.identity_trace = t;
            continue;
        }
        rep.checked += 1;
        if t.norm() > ALGEBRA_TOL {
            rep.violations.push((p.indices, t));
        }
    }
    rep
}

/// Real rank of `{F^λ} ∪ {j F^λ}`; equals `2^{2a+1}` exactly when the
/// products form a complex basis of all `n x n` matrices.
pub fn basis_real_rank(set: &CliffordSet) -> usize {
    let products = set.all_products();
    let rows = 2 * set.n() * set.n();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(2 * products.len());
    for p in &products {
        cols.push(tilde_vec(&vec_columns(&p.matrix)));
        cols.push(tilde_vec(&vec_columns(&p.matrix.scale(c(0., 1.)))));
    }
    let m = RealMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    column_rank(&m, 1e-9)
}
