//! Sparse multi-indices over `c0(N)` and the graded monomial basis.
//!
//! A multi-index `a = (a_1, a_2, ...)` with finitely many non-zero entries
//! addresses the monomial `x^a = prod_k <x, e_k>^{a_k}`. Two notions of
//! degree coexist here: the *algebraic* degree `sum_k a_k` (total degree) and
//! the *harmonic* degree `max {k : a_k != 0}` (the number of coordinates the
//! monomial actually touches). The space `P_{d,n}` of polynomials with
//! algebraic degree at most `d` and harmonic degree at most `n` has dimension
//! `C(n+d, n)`; [`enumerate_basis`] lists its monomial basis in a fixed
//! graded order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use thiserror::Error;

use crate::hilbert::HPoint;

/// Default cap on basis sizes; the Gram matrix is dense and quadratic in
/// this count.
pub const MAX_BASIS_SIZE: usize = 100_000;

/// Errors from basis enumeration.
#[derive(Debug, Error)]
pub enum BasisError {
    #[error("basis of dimension {required} exceeds the capacity limit {cap}")]
    CapacityExceeded { required: u128, cap: usize },
}

/// Errors from parsing the `x1^3*x2` text form of a multi-index.
#[derive(Debug, Error)]
pub enum ParseIndexError {
    #[error("empty multi-index text")]
    Empty,
    #[error("malformed factor {0:?}, expected `xK` or `xK^E`")]
    MalformedFactor(String),
    #[error("coordinate must be >= 1 in factor {0:?}")]
    ZeroCoordinate(String),
}

/// A finitely supported exponent sequence, stored sparsely as strictly
/// increasing `(coordinate, exponent)` pairs with all exponents positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    /// The zero index, addressing the constant monomial `1`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds an index from `(coordinate, exponent)` pairs. Pairs may come in
    /// any order; duplicates are summed and zero exponents dropped.
    pub fn new(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut map: Vec<(u32, u32)> = Vec::new();
        for (k, e) in pairs {
            assert!(k >= 1, "coordinates are 1-based");
            if e == 0 {
                continue;
            }
            match map.iter_mut().find(|(kk, _)| *kk == k) {
                Some((_, ee)) => *ee += e,
                None => map.push((k, e)),
            }
        }
        map.sort_unstable_by_key(|&(k, _)| k);
        Self { entries: map }
    }

    /// Builds an index from a dense exponent slice, `dense[i]` being the
    /// exponent of coordinate `i + 1`.
    pub fn from_dense(dense: &[u32]) -> Self {
        Self {
            entries: dense
                .iter()
                .enumerate()
                .filter(|&(_, &e)| e > 0)
                .map(|(i, &e)| (i as u32 + 1, e))
                .collect(),
        }
    }

    /// Sparse `(coordinate, exponent)` view, coordinates strictly increasing.
    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    /// Exponent of coordinate `k` (1-based); zero when absent.
    pub fn exponent(&self, k: u32) -> u32 {
        self.entries
            .binary_search_by_key(&k, |&(kk, _)| kk)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total degree `sum_k a_k`.
    pub fn algebraic_degree(&self) -> u32 {
        self.entries.iter().map(|&(_, e)| e).sum()
    }

    /// Largest active coordinate, zero for the empty index.
    pub fn harmonic_degree(&self) -> u32 {
        self.entries.last().map_or(0, |&(k, _)| k)
    }

    /// Evaluates the monomial `x^a` at a point; an empty index gives 1, and
    /// an active coordinate beyond the point's truncation contributes 0.
    /// Overflow propagates as +/-infinity for callers to flag.
    pub fn eval(&self, x: &HPoint) -> f64 {
        self.entries
            .iter()
            .map(|&(k, e)| x.coeff(k).powi(e as i32))
            .product()
    }

    /// Coordinate-wise exponent sum, in canonical sparse form. The moment
    /// matrix entry for basis elements `a_i`, `a_j` is the moment of
    /// `a_i + a_j`.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (ka, ea) = self.entries[i];
            let (kb, eb) = other.entries[j];
            match ka.cmp(&kb) {
                Ordering::Less => {
                    out.push((ka, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((kb, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((ka, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.entries[i..]);
        out.extend_from_slice(&other.entries[j..]);
        MultiIndex { entries: out }
    }
}

/// Basis order: graded by algebraic degree, then lexicographic on the dense
/// exponent prefix with larger leading exponents first, so a degree-`g` grade
/// starts at `x1^g` and ends at `xn^g`. The comparison is intrinsic (it does
/// not depend on any enclosing `(d, n)`), which keeps the relative order of
/// two indices stable across nested bases.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.algebraic_degree()
            .cmp(&other.algebraic_degree())
            .then_with(|| {
                let top = self.harmonic_degree().max(other.harmonic_degree());
                for k in 1..=top {
                    match other.exponent(k).cmp(&self.exponent(k)) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                Ordering::Equal
            })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    /// Renders as `x1^3*x2`; the zero index renders as `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for &(k, e) in &self.entries {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{k}")?;
            } else {
                write!(f, "x{k}^{e}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = ParseIndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseIndexError::Empty);
        }
        if s == "1" {
            return Ok(MultiIndex::zero());
        }
        let mut pairs = Vec::new();
        for factor in s.split('*') {
            let factor = factor.trim();
            let rest = factor
                .strip_prefix('x')
                .ok_or_else(|| ParseIndexError::MalformedFactor(factor.to_string()))?;
            let (coord, exp) = match rest.split_once('^') {
                Some((c, e)) => (c, e),
                None => (rest, "1"),
            };
            let k: u32 = coord
                .parse()
                .map_err(|_| ParseIndexError::MalformedFactor(factor.to_string()))?;
            let e: u32 = exp
                .parse()
                .map_err(|_| ParseIndexError::MalformedFactor(factor.to_string()))?;
            if k == 0 {
                return Err(ParseIndexError::ZeroCoordinate(factor.to_string()));
            }
            pairs.push((k, e));
        }
        Ok(MultiIndex::new(pairs))
    }
}

/// `C(a+b, b)` with overflow check.
pub fn binomial(a: u64, b: u64) -> Option<u128> {
    let b = b.min(a);
    let mut acc: u128 = 1;
    for i in 1..=b {
        acc = acc.checked_mul((a - b + i) as u128)?;
        acc /= i as u128; // exact at every step of the multiplicative formula
    }
    Some(acc)
}

/// The ordered monomial basis of `P_{d,n}`: all multi-indices with algebraic
/// degree `<= d` and harmonic degree `<= n`, with O(1) position lookup.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct BasisIndex {
    d: u32,
    n: u32,
    list: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

/// Version tag for the basis ordering, recorded in file headers.
pub const ORDERING_VERSION: &str = "graded-lex-v1";

/// Enumerates the monomial basis of `P_{d,n}` under the default capacity
/// guard of [`MAX_BASIS_SIZE`].
pub fn enumerate_basis(d: u32, n: u32) -> Result<BasisIndex, BasisError> {
    enumerate_basis_with_cap(d, n, MAX_BASIS_SIZE)
}

/// Enumerates the basis with an explicit capacity cap.
pub fn enumerate_basis_with_cap(d: u32, n: u32, cap: usize) -> Result<BasisIndex, BasisError> {
    let dim = binomial(d as u64 + n as u64, n as u64)
        .filter(|&c| c <= cap as u128)
        .ok_or(BasisError::CapacityExceeded {
            required: binomial(d as u64 + n as u64, n as u64).unwrap_or(u128::MAX),
            cap,
        })?;
    let mut list = Vec::with_capacity(dim as usize);
    let mut dense = vec![0u32; n as usize];
    for grade in 0..=d {
        push_grade(&mut list, &mut dense, 0, grade);
    }
    debug_assert_eq!(list.len() as u128, dim);
    let positions = list
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    Ok(BasisIndex {
        d,
        n,
        list,
        positions,
    })
}

/// Emits all dense exponent tuples of exact total degree `remaining` over
/// coordinates `from..n`, leading coordinate largest first.
fn push_grade(out: &mut Vec<MultiIndex>, dense: &mut Vec<u32>, from: usize, remaining: u32) {
    if from == dense.len() {
        if remaining == 0 {
            out.push(MultiIndex::from_dense(dense));
        }
        return;
    }
    if from == dense.len() - 1 {
        dense[from] = remaining;
        out.push(MultiIndex::from_dense(dense));
        dense[from] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        dense[from] = e;
        push_grade(out, dense, from + 1, remaining - e);
        dense[from] = 0;
    }
}

impl BasisIndex {
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.list[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.list.iter()
    }

    /// Ordinal of a multi-index within the basis, if present.
    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.positions.get(a).copied()
    }

    /// Evaluates the full monomial vector `b_{d,n}(x)`.
    pub fn eval_monomials(&self, x: &HPoint) -> DVector<f64> {
        DVector::from_iterator(self.list.len(), self.list.iter().map(|a| a.eval(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_index(rng: &mut StdRng) -> MultiIndex {
        let terms = rng.gen_range(0..4);
        MultiIndex::new((0..terms).map(|_| (rng.gen_range(1..6), rng.gen_range(1..4))))
    }

    fn random_point(rng: &mut StdRng, len: usize) -> HPoint {
        HPoint::new((0..len).map(|_| rng.gen_range(-1.5..1.5)).collect())
    }

    #[test]
    fn degrees_of_paper_example() {
        // a = (3, 1, 0, ...) addresses x1^3 * x2
        let a = MultiIndex::from_dense(&[3, 1]);
        assert_eq!(a.algebraic_degree(), 4);
        assert_eq!(a.harmonic_degree(), 2);
    }

    #[test]
    fn degrees_of_edge_indices() {
        assert_eq!(MultiIndex::zero().algebraic_degree(), 0);
        assert_eq!(MultiIndex::zero().harmonic_degree(), 0);
        let single = MultiIndex::from_dense(&[0, 0, 5]);
        assert_eq!(single.algebraic_degree(), 5);
        assert_eq!(single.harmonic_degree(), 3);
        let at4 = MultiIndex::from_dense(&[0, 0, 0, 2]);
        assert_eq!(at4.harmonic_degree(), 4);
    }

    #[test]
    fn monomial_eval_cases() {
        let x = HPoint::new(vec![2.0, 3.0]);
        assert_eq!(MultiIndex::zero().eval(&x), 1.0);
        assert_eq!(MultiIndex::from_dense(&[3, 1]).eval(&x), 24.0);
        // active coordinate beyond the truncation evaluates to zero
        let short = HPoint::new(vec![5.0]);
        assert_eq!(MultiIndex::from_dense(&[0, 2]).eval(&short), 0.0);
    }

    #[test]
    fn add_indices_cases() {
        let zero = MultiIndex::zero();
        let b = MultiIndex::from_dense(&[1, 2]);
        assert_eq!(zero.add(&b), b);
        let lhs = MultiIndex::from_dense(&[2, 0, 1]);
        let rhs = MultiIndex::from_dense(&[0, 3]);
        assert_eq!(lhs.add(&rhs), MultiIndex::from_dense(&[2, 3, 1]));
        let one = MultiIndex::from_dense(&[1]);
        assert_eq!(one.add(&one), MultiIndex::from_dense(&[2]));
    }

    #[test]
    fn basis_dimension_identity_exhaustive() {
        for d in 0..=8u32 {
            for n in 0..=8u32 {
                let basis = enumerate_basis(d, n).unwrap();
                let expect = binomial((d + n) as u64, n as u64).unwrap();
                assert_eq!(basis.len() as u128, expect, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn basis_paper_instance() {
        assert_eq!(enumerate_basis(4, 2).unwrap().len(), 15);
        assert_eq!(enumerate_basis(0, 7).unwrap().len(), 1);
        assert!(enumerate_basis(0, 7).unwrap().get(0).is_zero());
        assert_eq!(enumerate_basis(2, 3).unwrap().len(), 10);
    }

    #[test]
    fn basis_elements_valid_distinct_and_indexed() {
        let basis = enumerate_basis(4, 3).unwrap();
        for (i, a) in basis.iter().enumerate() {
            assert!(a.algebraic_degree() <= 4);
            assert!(a.harmonic_degree() <= 3);
            assert_eq!(basis.position(a), Some(i));
        }
        let mut seen = std::collections::HashSet::new();
        assert!(basis.iter().all(|a| seen.insert(a.clone())));
    }

    #[test]
    fn basis_is_sorted_and_starts_at_constant() {
        let basis = enumerate_basis(3, 3).unwrap();
        assert!(basis.get(0).is_zero());
        for w in basis.list.windows(2) {
            assert!(w[0] < w[1], "{} !< {}", w[0], w[1]);
        }
    }

    #[test]
    fn basis_nesting_as_sets_and_prefix_in_d() {
        let small = enumerate_basis(2, 2).unwrap();
        let large = enumerate_basis(4, 4).unwrap();
        for a in small.iter() {
            assert!(large.position(a).is_some());
        }
        // with n fixed, growing d appends grades: exact prefix
        let taller = enumerate_basis(4, 2).unwrap();
        for (i, a) in small.iter().enumerate() {
            assert_eq!(taller.get(i), a);
        }
    }

    #[test]
    fn monomial_product_homomorphism() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..200 {
            let a = random_index(&mut rng);
            let b = random_index(&mut rng);
            let x = random_point(&mut rng, 6);
            let lhs = a.add(&b).eval(&x);
            let rhs = a.eval(&x) * b.eval(&x);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "{a} + {b} at {x:?}"
            );
            assert_eq!(
                a.add(&b).algebraic_degree(),
                a.algebraic_degree() + b.algebraic_degree()
            );
            assert_eq!(
                a.add(&b).harmonic_degree(),
                a.harmonic_degree().max(b.harmonic_degree())
            );
        }
    }

    #[test]
    fn capacity_guard_trips() {
        match enumerate_basis(20, 20) {
            Err(BasisError::CapacityExceeded { required, cap }) => {
                assert!(required > cap as u128);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn display_and_parse_round_trip() {
        let cases = [
            MultiIndex::zero(),
            MultiIndex::from_dense(&[3, 1]),
            MultiIndex::from_dense(&[0, 2, 0, 7]),
        ];
        for a in cases {
            let text = a.to_string();
            let back: MultiIndex = text.parse().unwrap();
            assert_eq!(back, a, "{text}");
        }
        assert_eq!(MultiIndex::from_dense(&[3, 1]).to_string(), "x1^3*x2");
        assert!("x0^2".parse::<MultiIndex>().is_err());
        assert!("y1".parse::<MultiIndex>().is_err());
        assert!("".parse::<MultiIndex>().is_err());
    }
}
