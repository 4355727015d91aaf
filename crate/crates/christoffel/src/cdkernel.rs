//! The Christoffel-Darboux kernel, the Christoffel function, and point
//! scoring.
//!
//! Fitting a measure at order `(d, n)` factorizes its moment matrix
//! `M = Q S Q^T`; the kernel is then evaluated in spectral form,
//! `K(x, y) = sum_i q_i(x) q_i(y) / s_i` with `q_i(x) = q_i^T b(x)`, which
//! stays stable for small eigenvalues and gives the pseudo-inverse mode for
//! free. The diagonal `p(x) = K(x, x)` is the CD polynomial: its average
//! under the fitted measure is the basis dimension, it stays moderate on the
//! support, and it grows exponentially outside, which is why raw `p` values
//! serve as outlier scores. The Christoffel function `C(z) = 1/K(z, z)` is
//! the minimum of `integral of p^2` over polynomials with `p(z) = 1`;
//! [`christoffel_qp_oracle`] solves that quadratic program directly as a
//! bordered linear system and is kept independent of the kernel path so the
//! closed form can be checked against it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::fmt_f64;
use crate::hilbert::HPoint;
use crate::measures::Measure;
use crate::moments::{
    assemble, factorize, InverseMode, MomentError, MomentMatrix, SpectralFactorization,
    DEFAULT_RANK_TOL,
};
use crate::multiindex::BasisIndex;

/// Absolute floor under which `K(z, z)` is treated as degenerate instead of
/// being inverted to a huge Christoffel value.
pub const DEGENERATE_KZZ: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Moments(#[from] MomentError),
    #[error("degenerate evaluation: K(z,z) = {kzz} is below {DEGENERATE_KZZ}")]
    DegenerateEvaluation { kzz: f64 },
    #[error("bordered stationarity system is singular")]
    BorderedSingular,
    #[error("model file {path}:{line}: {reason}")]
    ModelFormat {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Fit controls: ridge regularization, relative rank tolerance, and whether
/// evaluation insists on a full-rank factorization.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub ridge: f64,
    pub rank_tol: f64,
    pub mode: InverseMode,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            rank_tol: DEFAULT_RANK_TOL,
            mode: InverseMode::Full,
        }
    }
}

/// A fitted Christoffel-Darboux model: the moment matrix, its spectral
/// factorization, and the evaluation mode. Immutable and shareable across
/// threads.
#[derive(Debug, Clone)]
pub struct CDModel {
    moments: MomentMatrix,
    factorization: SpectralFactorization,
    mode: InverseMode,
    data_trunc: u32,
}

/// Assembles and factorizes the moment matrix of `mu` at order `(d, n)`.
/// In `Full` mode a rank-deficient matrix is an error unless a positive
/// ridge lifts it; `Pseudo` mode accepts the deficiency and evaluates on the
/// surviving eigenspace.
pub fn fit(mu: &Measure, d: u32, n: u32, opts: &FitOptions) -> Result<CDModel, KernelError> {
    let mm = assemble(mu, d, n)?;
    fit_from_matrix(mm, opts, measure_trunc(mu))
}

/// Fit from an already assembled moment matrix.
pub fn fit_from_matrix(
    mm: MomentMatrix,
    opts: &FitOptions,
    data_trunc: u32,
) -> Result<CDModel, KernelError> {
    let factorization = factorize(&mm, opts.ridge, opts.rank_tol)?;
    if opts.mode == InverseMode::Full && !factorization.is_full_rank() {
        return Err(KernelError::Moments(MomentError::Singular {
            deficient: factorization.size() - factorization.effective_rank(),
            size: factorization.size(),
        }));
    }
    Ok(CDModel {
        moments: mm,
        factorization,
        mode: opts.mode,
        data_trunc,
    })
}

/// Largest truncation among empirical points of a measure, used to flag
/// suspicious score inputs.
fn measure_trunc(mu: &Measure) -> u32 {
    match mu {
        Measure::Empirical { points, .. } => points
            .iter()
            .map(|p| p.trimmed().len() as u32)
            .max()
            .unwrap_or(0),
        Measure::Product(_) => u32::MAX,
        Measure::Mixture(parts) => parts
            .iter()
            .map(|(_, m)| measure_trunc(m))
            .max()
            .unwrap_or(0),
    }
}

impl CDModel {
    pub fn basis(&self) -> &BasisIndex {
        self.moments.basis()
    }

    pub fn moments(&self) -> &MomentMatrix {
        &self.moments
    }

    pub fn factorization(&self) -> &SpectralFactorization {
        &self.factorization
    }

    pub fn mode(&self) -> InverseMode {
        self.mode
    }

    pub fn provenance(&self) -> &str {
        &self.moments.meta().measure
    }

    /// Truncation of the fitting data; `u32::MAX` for analytic measures.
    pub fn data_trunc(&self) -> u32 {
        self.data_trunc
    }

    pub fn d(&self) -> u32 {
        self.basis().d()
    }

    pub fn n(&self) -> u32 {
        self.basis().n()
    }

    /// `K(x, y)` in spectral form. Symmetric in its arguments by
    /// construction.
    pub fn kernel(&self, x: &HPoint, y: &HPoint) -> f64 {
        self.factorization.inverse_quadratic_form(
            &self.basis().eval_monomials(x),
            &self.basis().eval_monomials(y),
        )
    }

    /// The CD polynomial `p(x) = K(x, x) >= 0`.
    pub fn cd_polynomial(&self, x: &HPoint) -> f64 {
        let b = self.basis().eval_monomials(x);
        self.factorization.inverse_quadratic_form(&b, &b)
    }

    /// The Christoffel function `C(z) = 1/K(z, z)`, in `(0, 1]` on the
    /// support of a probability measure.
    pub fn christoffel(&self, z: &HPoint) -> Result<f64, KernelError> {
        let kzz = self.cd_polynomial(z);
        if kzz <= DEGENERATE_KZZ {
            return Err(KernelError::DegenerateEvaluation { kzz });
        }
        Ok(1.0 / kzz)
    }

    /// Coefficients (in basis order) of the optimal witness
    /// `K(., z)/K(z, z)`: it evaluates to 1 at `z` and its squared integral
    /// equals `C(z)`.
    pub fn minimizer(&self, z: &HPoint) -> Result<Vec<f64>, KernelError> {
        let bz = self.basis().eval_monomials(z);
        let kzz = self.factorization.inverse_quadratic_form(&bz, &bz);
        if kzz <= DEGENERATE_KZZ {
            return Err(KernelError::DegenerateEvaluation { kzz });
        }
        let coeffs = self.factorization.apply_inverse(&bz, self.mode)?;
        Ok(coeffs.iter().map(|c| c / kzz).collect())
    }

    /// The average of the CD polynomial under `mu`, computed as
    /// `trace(M^{-1} M_mu)` through the factorization. When `mu` is the
    /// fitted measure, the fit is full rank, and the ridge is zero, this is
    /// exactly the basis dimension `C(n+d, n)`; a pseudo-inverse fit yields
    /// the effective rank instead.
    pub fn average_cd(&self, mu: &Measure) -> Result<f64, KernelError> {
        let mm = assemble(mu, self.basis().d(), self.basis().n())?;
        let q = self.factorization.q();
        let projected = q.transpose() * mm.matrix() * q;
        let cut = self.factorization.rank_tol() * self.factorization.max_eigenvalue();
        Ok(self
            .factorization
            .eigenvalues()
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s > cut)
            .map(|(i, &s)| projected[(i, i)] / s)
            .sum())
    }

    /// CD polynomial values for a batch of points, in input order. Pure and
    /// parallel; the output does not depend on the worker count.
    pub fn score(&self, points: &[HPoint]) -> Vec<f64> {
        points.par_iter().map(|x| self.cd_polynomial(x)).collect()
    }

    /// Writes the model file: the moment-matrix text block, two model keys
    /// (`mode`, `data_trunc`), then the factorization block.
    pub fn save(&self, path: &Path) -> Result<(), KernelError> {
        let file = File::create(path).map_err(|source| KernelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        self.write_text(&mut w).map_err(|source| KernelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        self.moments.write_text(&mut w)?;
        writeln!(w, "mode {}", self.mode)?;
        writeln!(w, "data_trunc {}", self.data_trunc)?;
        self.factorization.write_text(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self, KernelError> {
        let file = File::open(path).map_err(|source| KernelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_text(BufReader::new(file), &path.display().to_string())
    }

    pub fn read_text<R: BufRead>(mut r: R, path: &str) -> Result<Self, KernelError> {
        let moments = MomentMatrix::read_text(&mut r, path)?;
        let fail = |reason: String| KernelError::ModelFormat {
            path: path.to_string(),
            line: 0,
            reason,
        };
        let keyed = |key: &str, r: &mut R| -> Result<String, KernelError> {
            let mut line = String::new();
            loop {
                line.clear();
                let read = r.read_line(&mut line).map_err(|e| fail(e.to_string()))?;
                if read == 0 {
                    return Err(fail("unexpected end of file".to_string()));
                }
                if !line.trim().is_empty() {
                    break;
                }
            }
            line.trim_end()
                .strip_prefix(key)
                .map(|rest| rest.trim().to_string())
                .ok_or_else(|| fail(format!("expected `{key} ...`, got {line:?}")))
        };
        let mode: InverseMode = keyed("mode", &mut r)?
            .parse()
            .map_err(|e| fail(format!("mode: {e}")))?;
        let data_trunc: u32 = keyed("data_trunc", &mut r)?
            .parse()
            .map_err(|e| fail(format!("data_trunc: {e}")))?;
        let factorization = SpectralFactorization::read_text(&mut r, path, moments.size())?;
        Ok(CDModel {
            moments,
            factorization,
            mode,
            data_trunc,
        })
    }
}

/// Solution of the constrained quadratic program behind the Christoffel
/// function.
#[derive(Debug, Clone)]
pub struct QpSolution {
    /// The minimum of `integral of p^2` subject to `p(z) = 1`.
    pub value: f64,
    /// Coefficients of the minimizing polynomial in basis order.
    pub minimizer: Vec<f64>,
}

/// Solves `min p^T M p  s.t.  b(z)^T p = 1` directly from the stationarity
/// conditions `M p = lambda b(z)`, `b(z)^T p = 1`, assembled as one bordered
/// linear system and solved by LU. This route never touches the spectral
/// factorization, so it serves as the verification oracle for the
/// `1/K(z, z)` closed form.
pub fn christoffel_qp_oracle(
    mu: &Measure,
    d: u32,
    n: u32,
    z: &HPoint,
) -> Result<QpSolution, KernelError> {
    let mm = assemble(mu, d, n)?;
    let size = mm.size();
    let bz = mm.basis().eval_monomials(z);
    let mut bordered = DMatrix::zeros(size + 1, size + 1);
    bordered.view_mut((0, 0), (size, size)).copy_from(mm.matrix());
    for i in 0..size {
        bordered[(i, size)] = -bz[i];
        bordered[(size, i)] = bz[i];
    }
    let mut rhs = DVector::zeros(size + 1);
    rhs[size] = 1.0;
    let solution = bordered
        .lu()
        .solve(&rhs)
        .ok_or(KernelError::BorderedSingular)?;
    let p = solution.rows(0, size).into_owned();
    let value = (p.transpose() * mm.matrix() * &p)[(0, 0)];
    Ok(QpSolution {
        value,
        minimizer: p.iter().copied().collect(),
    })
}

/// Writes scores as CSV with columns `index,cd_polynomial,christoffel` at 17
/// significant digits. An empty batch produces a header-only file.
pub fn write_scores_csv<W: Write>(mut w: W, scores: &[f64]) -> std::io::Result<()> {
    writeln!(w, "index,cd_polynomial,christoffel")?;
    for (i, &p) in scores.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(p), fmt_f64(1.0 / p))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::binomial;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn uniform_coordinate_model() -> CDModel {
        fit(&Measure::cube_uniform(), 1, 1, &FitOptions::default()).unwrap()
    }

    fn random_empirical(rng: &mut StdRng, count: usize, len: usize) -> Measure {
        Measure::empirical(
            (0..count)
                .map(|_| HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_model_closed_form() {
        // M = diag(1, 1/3) so K(x, y) = 1 + 3 x1 y1
        let model = uniform_coordinate_model();
        let at = |x: f64| HPoint::new(vec![x]);
        assert!((model.kernel(&at(0.0), &at(0.0)) - 1.0).abs() < 1e-12);
        assert!((model.kernel(&at(1.0), &at(1.0)) - 4.0).abs() < 1e-12);
        assert!((model.kernel(&at(0.5), &at(-0.5)) - (1.0 - 0.75)).abs() < 1e-12);
        assert!((model.cd_polynomial(&at(1.0)) - 4.0).abs() < 1e-12);
        assert!((model.christoffel(&at(0.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((model.christoffel(&at(1.0)).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn degree_zero_kernel_is_constant() {
        let mut rng = StdRng::seed_from_u64(2);
        let mu = random_empirical(&mut rng, 5, 3);
        let model = fit(&mu, 0, 4, &FitOptions::default()).unwrap();
        for _ in 0..10 {
            let x = HPoint::new((0..3).map(|_| rng.gen_range(-2.0..2.0)).collect());
            assert!((model.cd_polynomial(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirac_fit_is_singular_unless_assisted() {
        let mu = Measure::dirac(HPoint::origin(1));
        match fit(&mu, 1, 1, &FitOptions::default()) {
            Err(KernelError::Moments(MomentError::Singular { deficient, size })) => {
                assert_eq!((deficient, size), (1, 2));
            }
            other => panic!("expected singularity, got {other:?}"),
        }
        let ridged = fit(
            &mu,
            1,
            1,
            &FitOptions {
                ridge: 1e-6,
                ..FitOptions::default()
            },
        );
        assert!(ridged.is_ok());
        let pseudo = fit(
            &mu,
            1,
            1,
            &FitOptions {
                mode: InverseMode::Pseudo,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert_eq!(pseudo.factorization().effective_rank(), 1);
    }

    #[test]
    fn kernel_symmetry_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(3);
        let mu = random_empirical(&mut rng, 25, 2);
        let model = fit(&mu, 2, 2, &FitOptions::default()).unwrap();
        for _ in 0..50 {
            let x = HPoint::new((0..2).map(|_| rng.gen_range(-1.5..1.5)).collect());
            let y = HPoint::new((0..2).map(|_| rng.gen_range(-1.5..1.5)).collect());
            assert_eq!(model.kernel(&x, &y), model.kernel(&y, &x));
        }
    }

    #[test]
    fn christoffel_range_and_reciprocal_identity() {
        let mut rng = StdRng::seed_from_u64(5);
        let mu = random_empirical(&mut rng, 30, 2);
        let model = fit(&mu, 2, 2, &FitOptions::default()).unwrap();
        for _ in 0..50 {
            let z = HPoint::new((0..2).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let c = model.christoffel(&z).unwrap();
            assert!(c > 0.0 && c <= 1.0 + 1e-9, "C = {c}");
            assert!((c * model.cd_polynomial(&z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn minimizer_normalization_and_optimality() {
        let model = uniform_coordinate_model();
        let z = HPoint::new(vec![1.0]);
        let coeffs = model.minimizer(&z).unwrap();
        assert!((coeffs[0] - 0.25).abs() < 1e-12);
        assert!((coeffs[1] - 0.75).abs() < 1e-12);

        let mut rng = StdRng::seed_from_u64(7);
        let mu = random_empirical(&mut rng, 30, 2);
        let model = fit(&mu, 2, 2, &FitOptions::default()).unwrap();
        for _ in 0..20 {
            let z = HPoint::new((0..2).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let coeffs = model.minimizer(&z).unwrap();
            let at_z: f64 = coeffs
                .iter()
                .zip(model.basis().iter())
                .map(|(c, a)| c * a.eval(&z))
                .sum();
            assert!((at_z - 1.0).abs() < 1e-10);
            let integral = mu.integrate_sq(&coeffs, model.basis());
            let c = model.christoffel(&z).unwrap();
            assert!((integral - c).abs() <= 1e-8 * (1.0 + c));
        }
    }

    #[test]
    fn qp_oracle_agrees_with_closed_form() {
        let mut rng = StdRng::seed_from_u64(11);
        for trial in 0..30 {
            let len = rng.gen_range(1..4usize);
            let d = rng.gen_range(1..4u32);
            let n = rng.gen_range(1..=len as u32);
            let dim = binomial((d + n) as u64, n as u64).unwrap() as usize;
            let extra = rng.gen_range(5..20);
            let mu = random_empirical(&mut rng, dim + extra, len);
            let z = HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let model = match fit(&mu, d, n, &FitOptions::default()) {
                Ok(m) => m,
                Err(_) => continue, // rare rank-deficient draw
            };
            let closed = model.christoffel(&z).unwrap();
            let qp = christoffel_qp_oracle(&mu, d, n, &z).unwrap();
            assert!(
                (closed - qp.value).abs() <= 1e-8 * closed.abs().max(qp.value.abs()),
                "trial {trial}: closed {closed} vs qp {}",
                qp.value
            );
            let at_z: f64 = qp
                .minimizer
                .iter()
                .zip(model.basis().iter())
                .map(|(c, a)| c * a.eval(&z))
                .sum();
            assert!((at_z - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qp_oracle_degree_zero_is_one() {
        let mut rng = StdRng::seed_from_u64(13);
        let mu = random_empirical(&mut rng, 10, 2);
        let z = HPoint::new(vec![5.0, -3.0]);
        let qp = christoffel_qp_oracle(&mu, 0, 2, &z).unwrap();
        assert!((qp.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_evaluation_raises_instead_of_infinity() {
        // Dirac at (1): the surviving eigenvector is (1, 1)/sqrt(2), and
        // b(-1) = (1, -1) is orthogonal to it, so K(-1, -1) collapses
        let mu = Measure::dirac(HPoint::new(vec![1.0]));
        let model = fit(
            &mu,
            1,
            1,
            &FitOptions {
                mode: InverseMode::Pseudo,
                ..FitOptions::default()
            },
        )
        .unwrap();
        match model.christoffel(&HPoint::new(vec![-1.0])) {
            Err(KernelError::DegenerateEvaluation { kzz }) => assert!(kzz <= DEGENERATE_KZZ),
            other => panic!("expected degenerate evaluation, got {other:?}"),
        }
        assert!(model.christoffel(&HPoint::new(vec![1.0])).is_ok());
    }

    #[test]
    fn average_cd_trace_identity() {
        let model = uniform_coordinate_model();
        let avg = model.average_cd(&Measure::cube_uniform()).unwrap();
        assert!((avg - 2.0).abs() < 1e-12);

        let mut rng = StdRng::seed_from_u64(17);
        let mu = random_empirical(&mut rng, 40, 2);
        let model = fit(&mu, 4, 2, &FitOptions::default()).unwrap();
        assert!((model.average_cd(&mu).unwrap() - 15.0).abs() < 1e-9 * 15.0);

        // pseudo-inverse fit of a Dirac: effective rank instead
        let dirac = Measure::dirac(HPoint::origin(1));
        let pseudo = fit(
            &dirac,
            1,
            1,
            &FitOptions {
                mode: InverseMode::Pseudo,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!((pseudo.average_cd(&dirac).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_mean_matches_dimension_and_is_equivariant() {
        let mut rng = StdRng::seed_from_u64(19);
        let points: Vec<HPoint> = (0..35)
            .map(|_| HPoint::new((0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let mu = Measure::empirical(points.clone()).unwrap();
        let model = fit(&mu, 2, 2, &FitOptions::default()).unwrap();
        let scores = model.score(&points);
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        assert!((mean - 6.0).abs() < 1e-6);

        assert!(model.score(&[]).is_empty());

        let mut reversed = points.clone();
        reversed.reverse();
        let mut scores_rev = model.score(&reversed);
        scores_rev.reverse();
        assert_eq!(scores, scores_rev);
    }

    #[test]
    fn model_round_trip_preserves_scores_exactly() {
        let mut rng = StdRng::seed_from_u64(23);
        let mu = random_empirical(&mut rng, 30, 2);
        let model = fit(&mu, 2, 2, &FitOptions::default()).unwrap();
        let queries: Vec<HPoint> = (0..10)
            .map(|_| HPoint::new((0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()))
            .collect();

        let mut buf = Vec::new();
        model.write_text(&mut buf).unwrap();
        let back = CDModel::read_text(std::io::Cursor::new(&buf), "<mem>").unwrap();
        assert_eq!(back.d(), model.d());
        assert_eq!(back.mode(), model.mode());
        assert_eq!(back.data_trunc(), model.data_trunc());
        assert_eq!(model.score(&queries), back.score(&queries));

        assert!(CDModel::read_text(std::io::Cursor::new("junk"), "<mem>").is_err());
    }

    #[test]
    fn scores_csv_shape() {
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "index,cd_polynomial,christoffel\n"
        );
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &[4.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,4.0000000000000000e0,2.5"));
    }
}
