//! The moment matrix of a monomial basis and its spectral factorization.
//!
//! For a probability measure `mu` and the graded basis `b_{d,n}` of
//! `P_{d,n}`, the moment matrix is the Gram matrix
//! `M[i][j] = integral of x^{a_i + a_j} d(mu)`. It is symmetric positive
//! semidefinite; empirical measures with few points are routinely singular,
//! so degeneracy is a first-class mode here: the default is a hard error on
//! rank deficiency, with opt-in ridge regularization and an opt-in
//! pseudo-inverse that drops directions below a relative eigenvalue
//! threshold.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::fmt_f64;
use crate::measures::Measure;
use crate::multiindex::{enumerate_basis, BasisError, BasisIndex, ORDERING_VERSION};

/// Relative eigenvalue slack for PSD checks and clamping.
pub const PSD_SLACK: f64 = 1e-8;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MomentError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("moment for basis entry ({i},{j}) is not finite; rescale the data")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("symmetric eigensolver failed to converge")]
    EigenFailed,
    #[error("matrix is not positive semidefinite: eigenvalue {value} below -{slack}")]
    NotPositiveSemidefinite { value: f64, slack: f64 },
    #[error(
        "moment matrix is singular: {deficient} of {size} eigenvalues at or below \
         the rank tolerance; pass a ridge or request the pseudo-inverse"
    )]
    Singular { deficient: usize, size: usize },
    #[error("rank tolerance must lie in (0, 1), got {0}")]
    BadRankTol(f64),
    #[error("ridge must be nonnegative, got {0}")]
    BadRidge(f64),
    #[error("matrix file {path}:{line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Whether inverse application insists on full rank or projects onto the
/// numerically nonsingular eigenspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMode {
    Full,
    Pseudo,
}

impl fmt::Display for InverseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InverseMode::Full => write!(f, "full"),
            InverseMode::Pseudo => write!(f, "pseudo"),
        }
    }
}

impl std::str::FromStr for InverseMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(InverseMode::Full),
            "pseudo" => Ok(InverseMode::Pseudo),
            other => Err(format!("unknown inverse mode {other:?}")),
        }
    }
}

/// Assembly metadata carried along for file headers and reports.
#[derive(Debug, Clone)]
pub struct AssemblyMeta {
    pub measure: String,
    pub moment_evals: usize,
}

/// The symmetric Gram matrix of a monomial basis under a measure.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    basis: BasisIndex,
    matrix: DMatrix<f64>,
    meta: AssemblyMeta,
}

/// Assembles the moment matrix of order `(d, n)`.
///
/// Entries are computed for `i <= j` in row-major order and mirrored, so the
/// result is exactly symmetric and bit-reproducible for a fixed measure
/// regardless of worker count (each entry is an independent task with a
/// sequential inner sum).
pub fn assemble(mu: &Measure, d: u32, n: u32) -> Result<MomentMatrix, MomentError> {
    let basis = enumerate_basis(d, n)?;
    let size = basis.len();
    let pairs: Vec<(usize, usize)> = (0..size)
        .flat_map(|i| (i..size).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| mu.moment(&basis.get(i).add(basis.get(j))))
        .collect();
    let mut matrix = DMatrix::zeros(size, size);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        if !v.is_finite() {
            return Err(MomentError::NonFiniteEntry { i, j });
        }
        matrix[(i, j)] = v;
        matrix[(j, i)] = v;
    }
    Ok(MomentMatrix {
        basis,
        matrix,
        meta: AssemblyMeta {
            measure: mu.describe(),
            moment_evals: pairs.len(),
        },
    })
}

impl MomentMatrix {
    pub fn basis(&self) -> &BasisIndex {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn meta(&self) -> &AssemblyMeta {
        &self.meta
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes the text form: a commented header (order, ordering version,
    /// measure) followed by row-major entries at 17 significant digits.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# christoffel moment matrix v1")?;
        writeln!(w, "d {}", self.basis.d())?;
        writeln!(w, "n {}", self.basis.n())?;
        writeln!(w, "ordering {ORDERING_VERSION}")?;
        writeln!(w, "measure {}", self.meta.measure)?;
        writeln!(w, "size {}", self.size())?;
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|j| fmt_f64(self.matrix[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Reads the text form back; round-trips exactly.
    pub fn read_text<R: BufRead>(r: R, path: &str) -> Result<Self, MomentError> {
        let mut reader = LineReader::new(r, path);
        reader.expect_comment_or_magic()?;
        let d: u32 = reader.keyed("d")?;
        let n: u32 = reader.keyed("n")?;
        let ordering: String = reader.keyed("ordering")?;
        if ordering != ORDERING_VERSION {
            return Err(reader.err(format!(
                "unsupported basis ordering {ordering:?}, expected {ORDERING_VERSION:?}"
            )));
        }
        let measure: String = reader.keyed_rest("measure")?;
        let size: usize = reader.keyed("size")?;
        let basis = enumerate_basis(d, n)?;
        if basis.len() != size {
            return Err(reader.err(format!(
                "size {size} does not match C(n+d,n) = {}",
                basis.len()
            )));
        }
        let mut matrix = DMatrix::zeros(size, size);
        for i in 0..size {
            let row = reader.floats(size)?;
            for (j, v) in row.into_iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        Ok(MomentMatrix {
            basis,
            matrix,
            meta: AssemblyMeta {
                measure,
                moment_evals: 0,
            },
        })
    }
}

/// Eigendecomposition `M = Q S Q^T` with eigenvalues sorted descending,
/// plus the effective numerical rank under a relative tolerance.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    eigenvalues: DVector<f64>,
    q: DMatrix<f64>,
    ridge: f64,
    rank_tol: f64,
    effective_rank: usize,
}

/// Factorizes `M + ridge*I` by a symmetric eigensolver. Eigenvalues within
/// `-PSD_SLACK * s_max` of zero are clamped to zero; anything below that is
/// reported as a PSD violation.
pub fn factorize(
    mm: &MomentMatrix,
    ridge: f64,
    rank_tol: f64,
) -> Result<SpectralFactorization, MomentError> {
    factorize_matrix(mm.matrix(), ridge, rank_tol)
}

pub(crate) fn factorize_matrix(
    matrix: &DMatrix<f64>,
    ridge: f64,
    rank_tol: f64,
) -> Result<SpectralFactorization, MomentError> {
    if !(ridge >= 0.0) {
        return Err(MomentError::BadRidge(ridge));
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(MomentError::BadRankTol(rank_tol));
    }
    let size = matrix.nrows();
    let mut shifted = matrix.clone();
    for i in 0..size {
        shifted[(i, i)] += ridge;
    }
    let eig = nalgebra::SymmetricEigen::try_new(shifted, f64::EPSILON, 0)
        .ok_or(MomentError::EigenFailed)?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s_max = order.first().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);
    let slack = PSD_SLACK * s_max.max(f64::MIN_POSITIVE);
    let mut eigenvalues = DVector::zeros(size);
    let mut q = DMatrix::zeros(size, size);
    for (col, &src) in order.iter().enumerate() {
        let s = eig.eigenvalues[src];
        if s < -slack {
            return Err(MomentError::NotPositiveSemidefinite { value: s, slack });
        }
        eigenvalues[col] = s.max(0.0);
        q.set_column(col, &eig.eigenvectors.column(src));
    }
    let effective_rank = eigenvalues_rank(&eigenvalues, rank_tol);
    Ok(SpectralFactorization {
        eigenvalues,
        q,
        ridge,
        rank_tol,
        effective_rank,
    })
}

fn eigenvalues_rank(eigenvalues: &DVector<f64>, rank_tol: f64) -> usize {
    let s_max = eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if s_max <= 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&s| s > rank_tol * s_max).count()
}

impl SpectralFactorization {
    /// Eigenvalues in descending order (clamped at zero).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvector matrix, columns matching `eigenvalues`.
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.effective_rank == self.size()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.get(0).copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .get(self.size().saturating_sub(1))
            .copied()
            .unwrap_or(0.0)
    }

    /// Eigenvalues above the rank threshold, i.e. those the pseudo-inverse
    /// keeps.
    fn active(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cut = self.rank_tol * self.max_eigenvalue();
        self.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .filter(move |&(_, s)| s > cut)
    }

    /// Solves `M u = v` through `Q diag(1/s) Q^T`. `Full` mode errors on
    /// rank deficiency, naming the deficient eigenvalue count; `Pseudo`
    /// drops the deficient directions.
    pub fn apply_inverse(
        &self,
        v: &DVector<f64>,
        mode: InverseMode,
    ) -> Result<DVector<f64>, MomentError> {
        if mode == InverseMode::Full && !self.is_full_rank() {
            return Err(MomentError::Singular {
                deficient: self.size() - self.effective_rank,
                size: self.size(),
            });
        }
        let proj = self.q.transpose() * v;
        let mut scaled = DVector::zeros(self.size());
        for (i, s) in self.active() {
            scaled[i] = proj[i] / s;
        }
        Ok(&self.q * scaled)
    }

    /// `v^T M^{-1} w` through the factorization without forming the inverse.
    pub fn inverse_quadratic_form(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let pv = self.q.transpose() * v;
        let pw = self.q.transpose() * w;
        self.active().map(|(i, s)| pv[i] * pw[i] / s).sum()
    }

    /// Reconstruction `Q diag(s) Q^T`, for consistency checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.q.clone();
        for (i, s) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(i).scale_mut(*s);
        }
        &scaled * self.q.transpose()
    }

    /// Writes the factorization block appended to model files.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "factorization")?;
        writeln!(w, "ridge {}", fmt_f64(self.ridge))?;
        writeln!(w, "rank_tol {}", fmt_f64(self.rank_tol))?;
        writeln!(w, "effective_rank {}", self.effective_rank)?;
        let vals: Vec<String> = self.eigenvalues.iter().map(|s| fmt_f64(*s)).collect();
        writeln!(w, "eigenvalues {}", vals.join(" "))?;
        for i in 0..self.size() {
            let row: Vec<String> = (0..self.size())
                .map(|j| fmt_f64(self.q[(i, j)]))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Reads the factorization block.
    pub fn read_text<R: BufRead>(r: R, path: &str, size: usize) -> Result<Self, MomentError> {
        let mut reader = LineReader::new(r, path);
        let tag: String = reader.next_line()?;
        if tag.trim() != "factorization" {
            return Err(reader.err("expected `factorization` block".to_string()));
        }
        let ridge: f64 = reader.keyed("ridge")?;
        let rank_tol: f64 = reader.keyed("rank_tol")?;
        let effective_rank: usize = reader.keyed("effective_rank")?;
        let vals_line: String = reader.keyed_rest("eigenvalues")?;
        let eigenvalues = parse_floats(&vals_line, size)
            .map_err(|reason| reader.err(reason))
            .map(DVector::from_vec)?;
        let mut q = DMatrix::zeros(size, size);
        for i in 0..size {
            let row = reader.floats(size)?;
            for (j, v) in row.into_iter().enumerate() {
                q[(i, j)] = v;
            }
        }
        Ok(SpectralFactorization {
            eigenvalues,
            q,
            ridge,
            rank_tol,
            effective_rank,
        })
    }
}

fn parse_floats(line: &str, expect: usize) -> Result<Vec<f64>, String> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    if vals.len() != expect {
        return Err(format!("expected {expect} numbers, got {}", vals.len()));
    }
    Ok(vals)
}

/// Line-oriented reader with keyed headers and positioned errors.
struct LineReader<R> {
    inner: R,
    path: String,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    fn new(inner: R, path: &str) -> Self {
        Self {
            inner,
            path: path.to_string(),
            line: 0,
        }
    }

    fn err(&self, reason: String) -> MomentError {
        MomentError::Format {
            path: self.path.clone(),
            line: self.line,
            reason,
        }
    }

    fn next_line(&mut self) -> Result<String, MomentError> {
        let mut buf = String::new();
        loop {
            buf.clear();
            let read = self
                .inner
                .read_line(&mut buf)
                .map_err(|e| self.err(e.to_string()))?;
            self.line += 1;
            if read == 0 {
                return Err(self.err("unexpected end of file".to_string()));
            }
            if !buf.trim().is_empty() {
                return Ok(buf.trim_end().to_string());
            }
        }
    }

    fn expect_comment_or_magic(&mut self) -> Result<(), MomentError> {
        let line = self.next_line()?;
        if !line.starts_with('#') {
            return Err(self.err(format!("expected header comment, got {line:?}")));
        }
        Ok(())
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, MomentError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.keyed_rest(key)?;
        raw.trim()
            .parse::<T>()
            .map_err(|e| self.err(format!("bad value for {key}: {e}")))
    }

    fn keyed_rest(&mut self, key: &str) -> Result<String, MomentError> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .map(|rest| rest.trim().to_string())
            .ok_or_else(|| self.err(format!("expected `{key} ...`, got {line:?}")))
    }

    fn floats(&mut self, expect: usize) -> Result<Vec<f64>, MomentError> {
        let line = self.next_line()?;
        parse_floats(&line, expect).map_err(|reason| self.err(reason))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::HPoint;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_empirical(rng: &mut StdRng, count: usize, len: usize) -> Measure {
        Measure::empirical(
            (0..count)
                .map(|_| HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dirac_at_origin_matrix() {
        let mu = Measure::dirac(HPoint::origin(1));
        let mm = assemble(&mu, 1, 1).unwrap();
        assert_eq!(mm.size(), 2);
        assert_eq!(mm.matrix()[(0, 0)], 1.0);
        assert_eq!(mm.matrix()[(0, 1)], 0.0);
        assert_eq!(mm.matrix()[(1, 1)], 0.0);
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(f.effective_rank(), 1);
        assert!(!f.is_full_rank());
    }

    #[test]
    fn cube_coordinate_one_matrix() {
        let mm = assemble(&Measure::cube_uniform(), 1, 1).unwrap();
        assert_eq!(mm.matrix()[(0, 0)], 1.0);
        assert_eq!(mm.matrix()[(0, 1)], 0.0);
        assert!((mm.matrix()[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        assert!((f.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((f.eigenvalues()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn generic_empirical_matrix_is_nonsingular() {
        let mut rng = StdRng::seed_from_u64(5);
        let mu = random_empirical(&mut rng, 30, 2);
        let mm = assemble(&mu, 2, 2).unwrap();
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        assert!(f.is_full_rank());
        assert!(f.min_eigenvalue() > 0.0);
    }

    #[test]
    fn assembly_is_exactly_symmetric_and_psd() {
        let mut rng = StdRng::seed_from_u64(9);
        let mu = random_empirical(&mut rng, 25, 3);
        let mm = assemble(&mu, 2, 3).unwrap();
        let m = mm.matrix();
        for i in 0..mm.size() {
            for j in 0..mm.size() {
                assert_eq!(m[(i, j)], m[(j, i)]);
            }
        }
        // v^T M v equals the squared integral, and is nonnegative
        for _ in 0..20 {
            let v: Vec<f64> = (0..mm.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dv = DVector::from_vec(v.clone());
            let quad = (dv.transpose() * m * &dv)[(0, 0)];
            let via_integral = mu.integrate_sq(&v, mm.basis());
            assert!((quad - via_integral).abs() <= 1e-10 * (1.0 + quad.abs()));
            assert!(quad >= -1e-10);
        }
    }

    #[test]
    fn nestedness_via_position_mapping() {
        let mut rng = StdRng::seed_from_u64(13);
        let mu = random_empirical(&mut rng, 40, 4);
        let small = assemble(&mu, 2, 2).unwrap();
        let large = assemble(&mu, 3, 4).unwrap();
        for (i, a) in small.basis().iter().enumerate() {
            let pi = large.basis().position(a).unwrap();
            for (j, b) in small.basis().iter().enumerate() {
                let pj = large.basis().position(b).unwrap();
                assert_eq!(small.matrix()[(i, j)], large.matrix()[(pi, pj)]);
            }
        }
        // with n fixed, the smaller matrix is literally the leading block
        let tall = assemble(&mu, 3, 2).unwrap();
        for i in 0..small.size() {
            for j in 0..small.size() {
                assert_eq!(small.matrix()[(i, j)], tall.matrix()[(i, j)]);
            }
        }
    }

    #[test]
    fn factorize_identity_and_diagonal() {
        let mut rng = StdRng::seed_from_u64(17);
        let mu = random_empirical(&mut rng, 30, 2);
        let mm = assemble(&mu, 1, 2).unwrap();

        let ident = MomentMatrix {
            basis: mm.basis().clone(),
            matrix: DMatrix::identity(4, 4),
            meta: mm.meta().clone(),
        };
        let f = factorize(&ident, 0.0, DEFAULT_RANK_TOL).unwrap();
        assert!(f.eigenvalues().iter().all(|&s| (s - 1.0).abs() < 1e-14));
        let qtq = f.q().transpose() * f.q();
        assert!((qtq - DMatrix::identity(4, 4)).norm() < 1e-8);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let u = f.apply_inverse(&v, InverseMode::Full).unwrap();
        assert!((u - v).norm() < 1e-12);
    }

    #[test]
    fn ridge_shifts_the_dirac_spectrum() {
        let mu = Measure::dirac(HPoint::origin(1));
        let mm = assemble(&mu, 1, 1).unwrap();
        let f = factorize(&mm, 1e-6, DEFAULT_RANK_TOL).unwrap();
        assert!((f.eigenvalues()[0] - (1.0 + 1e-6)).abs() < 1e-12);
        assert!((f.eigenvalues()[1] - 1e-6).abs() < 1e-12);
        assert!(f.is_full_rank());
    }

    #[test]
    fn apply_inverse_diagonal_and_round_trip() {
        let mm = assemble(&Measure::cube_uniform(), 1, 1).unwrap();
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        let u = f
            .apply_inverse(&DVector::from_vec(vec![1.0, 1.0]), InverseMode::Full)
            .unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!((u[1] - 3.0).abs() < 1e-12);

        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..20 {
            let mu = random_empirical(&mut rng, 35, 2);
            let mm = assemble(&mu, 2, 2).unwrap();
            let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
            let u = DVector::from_iterator(mm.size(), (0..mm.size()).map(|_| rng.gen_range(-1.0..1.0)));
            let v = mm.matrix() * &u;
            let back = f.apply_inverse(&v, InverseMode::Full).unwrap();
            assert!(
                (&back - &u).norm() < 1e-8 * (1.0 + u.norm()),
                "round trip drift {}",
                (&back - &u).norm()
            );
        }
    }

    #[test]
    fn reconstruction_matches_input() {
        let mut rng = StdRng::seed_from_u64(29);
        let mu = random_empirical(&mut rng, 30, 3);
        let mm = assemble(&mu, 2, 3).unwrap();
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        let err = (f.reconstruct() - mm.matrix()).norm();
        assert!(err <= 1e-8 * mm.matrix().norm());
    }

    #[test]
    fn singular_full_inverse_names_deficient_count() {
        let mu = Measure::dirac(HPoint::origin(1));
        let mm = assemble(&mu, 2, 1).unwrap(); // basis 1, x1, x1^2: rank 1
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();
        match f.apply_inverse(&DVector::zeros(3), InverseMode::Full) {
            Err(MomentError::Singular { deficient, size }) => {
                assert_eq!(deficient, 2);
                assert_eq!(size, 3);
            }
            other => panic!("expected singularity error, got {other:?}"),
        }
        // pseudo mode proceeds on the surviving direction
        let v = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let u = f.apply_inverse(&v, InverseMode::Pseudo).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overflowing_monomials_are_flagged() {
        let mu = Measure::dirac(HPoint::new(vec![1e200]));
        match assemble(&mu, 2, 1) {
            Err(MomentError::NonFiniteEntry { .. }) => {}
            other => panic!("expected non-finite entry error, got {other:?}"),
        }
    }

    #[test]
    fn parameter_validation() {
        let mm = assemble(&Measure::cube_uniform(), 1, 1).unwrap();
        assert!(matches!(
            factorize(&mm, -1.0, DEFAULT_RANK_TOL),
            Err(MomentError::BadRidge(_))
        ));
        assert!(matches!(
            factorize(&mm, 0.0, 0.0),
            Err(MomentError::BadRankTol(_))
        ));
        assert!(matches!(
            factorize(&mm, 0.0, 1.5),
            Err(MomentError::BadRankTol(_))
        ));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut rng = StdRng::seed_from_u64(31);
        let mu = random_empirical(&mut rng, 20, 2);
        let mm = assemble(&mu, 2, 2).unwrap();
        let f = factorize(&mm, 0.0, DEFAULT_RANK_TOL).unwrap();

        let mut buf = Vec::new();
        mm.write_text(&mut buf).unwrap();
        f.write_text(&mut buf).unwrap();

        let mut cursor = std::io::Cursor::new(&buf);
        let mm2 = MomentMatrix::read_text(&mut cursor, "<mem>").unwrap();
        let f2 = SpectralFactorization::read_text(&mut cursor, "<mem>", mm2.size()).unwrap();

        assert_eq!(mm.matrix(), mm2.matrix());
        assert_eq!(mm.meta().measure, mm2.meta().measure);
        assert_eq!(f.eigenvalues(), f2.eigenvalues());
        assert_eq!(f.q(), f2.q());
        assert_eq!(f.effective_rank(), f2.effective_rank());

        let garbled = "not a matrix";
        assert!(MomentMatrix::read_text(std::io::Cursor::new(garbled), "<mem>").is_err());
    }
}
