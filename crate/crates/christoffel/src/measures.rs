//! Probability measures with a moment oracle `moment(a) = integral of x^a`.
//!
//! Three families are enough for fitting and for cross-checking the fits:
//! empirical measures over weighted points, analytic product measures whose
//! coordinate moments are known in closed form, and mixtures of the two
//! (point masses are single-point empirical components). Every moment of a
//! probability measure at the zero index equals one.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{read_points, HilbertError, HPoint};
use crate::multiindex::{BasisIndex, MultiIndex};

/// Weight-sum tolerance for probability measures.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("empirical measure needs at least one point")]
    EmptySupport,
    #[error("weights must be strictly positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("weights must sum to 1 within {WEIGHT_SUM_TOL}, got {0}")]
    WeightSum(f64),
    #[error("one weight per point required: {points} points, {weights} weights")]
    WeightCount { points: usize, weights: usize },
    #[error("gaussian coordinate rule needs decay exponent s > 1, got {0}")]
    InvalidDecay(f64),
    #[error("mixture needs at least one component")]
    EmptyMixture,
    #[error("unreadable measure spec {path}: {reason}")]
    Spec { path: String, reason: String },
    #[error(transparent)]
    Points(#[from] HilbertError),
}

/// Closed-form coordinate moment rules for product measures. Coordinates are
/// independent, so a product moment factorizes over the active coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProductRule {
    /// Uniform on `[-1/k, 1/k]` in coordinate `k` (the Hilbert-cube product):
    /// `m_k(j) = (1/k)^j / (j+1)` for even `j`, zero for odd `j`.
    CubeUniform,
    /// Centered Gaussian with variance `k^{-s}`, `s > 1`:
    /// `m_k(j) = (k^{-s})^{j/2} (j-1)!!` for even `j`, zero for odd `j`.
    /// Not compactly supported; this rule exists as a second analytic oracle
    /// for Gram-assembly cross-checks, not for support experiments.
    Gaussian { decay: f64 },
}

impl ProductRule {
    /// `m_k(j) = integral of t^j` under the coordinate-`k` factor.
    pub fn coordinate_moment(&self, k: u32, j: u32) -> f64 {
        if j % 2 == 1 {
            return 0.0;
        }
        match self {
            ProductRule::CubeUniform => {
                (1.0 / k as f64).powi(j as i32) / (j as f64 + 1.0)
            }
            ProductRule::Gaussian { decay } => {
                let lambda = (k as f64).powf(-decay);
                lambda.powi(j as i32 / 2) * double_factorial_odd(j)
            }
        }
    }
}

/// `(j-1)!! = 1 * 3 * ... * (j-1)` for even `j`, as a float.
fn double_factorial_odd(j: u32) -> f64 {
    (1..j).step_by(2).map(|i| i as f64).product()
}

/// A probability measure on (a subset of) `H` with computable moments.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Empirical {
        points: Vec<HPoint>,
        weights: Vec<f64>,
    },
    Product(ProductRule),
    Mixture(Vec<(f64, Measure)>),
}

impl Measure {
    /// Uniformly weighted empirical measure (`1/N` each).
    pub fn empirical(points: Vec<HPoint>) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Ok(Measure::Empirical { points, weights })
    }

    /// Weighted empirical measure; weights must be positive and sum to one.
    pub fn empirical_weighted(
        points: Vec<HPoint>,
        weights: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        if points.is_empty() {
            return Err(MeasureError::EmptySupport);
        }
        if points.len() != weights.len() {
            return Err(MeasureError::WeightCount {
                points: points.len(),
                weights: weights.len(),
            });
        }
        validate_weights(&weights)?;
        Ok(Measure::Empirical { points, weights })
    }

    /// Point mass at `z`.
    pub fn dirac(z: HPoint) -> Self {
        Measure::Empirical {
            points: vec![z],
            weights: vec![1.0],
        }
    }

    pub fn cube_uniform() -> Self {
        Measure::Product(ProductRule::CubeUniform)
    }

    pub fn gaussian(decay: f64) -> Result<Self, MeasureError> {
        if !(decay > 1.0) {
            return Err(MeasureError::InvalidDecay(decay));
        }
        Ok(Measure::Product(ProductRule::Gaussian { decay }))
    }

    pub fn mixture(components: Vec<(f64, Measure)>) -> Result<Self, MeasureError> {
        if components.is_empty() {
            return Err(MeasureError::EmptyMixture);
        }
        let weights: Vec<f64> = components.iter().map(|(w, _)| *w).collect();
        validate_weights(&weights)?;
        Ok(Measure::Mixture(components))
    }

    /// The moment `integral of x^a d(mu)`. Empirical measures sum pointwise
    /// in a fixed order, product measures factorize over active coordinates,
    /// mixtures combine linearly. Overflow propagates as non-finite values
    /// for callers to flag.
    pub fn moment(&self, a: &MultiIndex) -> f64 {
        match self {
            Measure::Empirical { points, weights } => points
                .iter()
                .zip(weights)
                .map(|(x, w)| w * a.eval(x))
                .sum(),
            Measure::Product(rule) => a
                .entries()
                .iter()
                .map(|&(k, e)| rule.coordinate_moment(k, e))
                .product(),
            Measure::Mixture(parts) => {
                parts.iter().map(|(w, m)| w * m.moment(a)).sum()
            }
        }
    }

    /// `integral of p` for `p` given by coefficients in basis order.
    pub fn integrate_poly(&self, coeffs: &[f64], basis: &BasisIndex) -> f64 {
        assert_eq!(coeffs.len(), basis.len(), "coefficients must match basis");
        coeffs
            .iter()
            .zip(basis.iter())
            .map(|(c, a)| c * self.moment(a))
            .sum()
    }

    /// `integral of p*q`, the `mu`-inner product of two polynomials, computed
    /// directly from moments of summed indices.
    pub fn integrate_product(&self, p: &[f64], q: &[f64], basis: &BasisIndex) -> f64 {
        assert_eq!(p.len(), basis.len(), "coefficients must match basis");
        assert_eq!(q.len(), basis.len(), "coefficients must match basis");
        let mut acc = 0.0;
        for (i, ai) in basis.iter().enumerate() {
            for (j, aj) in basis.iter().enumerate() {
                if p[i] != 0.0 && q[j] != 0.0 {
                    acc += p[i] * q[j] * self.moment(&ai.add(aj));
                }
            }
        }
        acc
    }

    /// `integral of p^2`; equals `p^T M p` for the moment matrix of the
    /// enclosing order, nonnegative up to roundoff.
    pub fn integrate_sq(&self, coeffs: &[f64], basis: &BasisIndex) -> f64 {
        self.integrate_product(coeffs, coeffs, basis)
    }

    /// The atom mass `mu({z})`: total weight of empirical points equal to
    /// `z` as points of `H`, zero for the continuous product families.
    pub fn atom_mass(&self, z: &HPoint) -> f64 {
        match self {
            Measure::Empirical { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(x, _)| x.same_point(z))
                .map(|(_, w)| w)
                .sum(),
            Measure::Product(_) => 0.0,
            Measure::Mixture(parts) => {
                parts.iter().map(|(w, m)| w * m.atom_mass(z)).sum()
            }
        }
    }

    /// Short description for file headers and model provenance.
    pub fn describe(&self) -> String {
        match self {
            Measure::Empirical { points, .. } => format!("empirical(n={})", points.len()),
            Measure::Product(ProductRule::CubeUniform) => "cube_uniform".to_string(),
            Measure::Product(ProductRule::Gaussian { decay }) => {
                format!("gaussian(s={decay})")
            }
            Measure::Mixture(parts) => {
                let inner: Vec<String> = parts
                    .iter()
                    .map(|(w, m)| format!("{w}*{}", m.describe()))
                    .collect();
                format!("mixture({})", inner.join(" + "))
            }
        }
    }
}

fn validate_weights(weights: &[f64]) -> Result<(), MeasureError> {
    for &w in weights {
        if !(w > 0.0) || !w.is_finite() {
            return Err(MeasureError::NonPositiveWeight(w));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(MeasureError::WeightSum(sum));
    }
    Ok(())
}

/// Declarative measure description for config files.
///
/// ```text
/// {"type": "empirical", "data": "points.csv"}
/// {"type": "empirical", "points": [[0.1, 0.2], [0.3, 0.0]], "weights": [0.5, 0.5]}
/// {"type": "cube_uniform", "n_trunc": 4}
/// {"type": "gaussian", "s": 2.0}
/// {"type": "atom", "point": [0.25, -0.1]}
/// {"type": "mixture", "components": [{"weight": 0.3, "measure": {...}}, ...]}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeasureSpec {
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    CubeUniform {
        /// Truncation used when the measure has to be sampled; analytic
        /// moments do not depend on it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_trunc: Option<u32>,
    },
    Gaussian { s: f64 },
    Atom { point: Vec<f64> },
    Mixture { components: Vec<MixtureComponentSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponentSpec {
    pub weight: f64,
    pub measure: MeasureSpec,
}

impl MeasureSpec {
    /// Parses a spec from JSON text.
    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        serde_json::from_str(text).map_err(|e| MeasureError::Spec {
            path: "<inline>".to_string(),
            reason: e.to_string(),
        })
    }

    /// Builds the measure, resolving relative data paths against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Measure, MeasureError> {
        match self {
            MeasureSpec::Empirical {
                data,
                points,
                weights,
            } => {
                let pts: Vec<HPoint> = match (data, points) {
                    (Some(rel), None) => read_points(&base_dir.join(rel))?,
                    (None, Some(rows)) => {
                        rows.iter().map(|r| HPoint::new(r.clone())).collect()
                    }
                    _ => {
                        return Err(MeasureSpec::spec_err(
                            "empirical needs exactly one of `data` or `points`",
                        ))
                    }
                };
                match weights {
                    Some(w) => Measure::empirical_weighted(pts, w.clone()),
                    None => Measure::empirical(pts),
                }
            }
            MeasureSpec::CubeUniform { .. } => Ok(Measure::cube_uniform()),
            MeasureSpec::Gaussian { s } => Measure::gaussian(*s),
            MeasureSpec::Atom { point } => Ok(Measure::dirac(HPoint::new(point.clone()))),
            MeasureSpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.weight, c.measure.build(base_dir)?)))
                    .collect::<Result<Vec<_>, MeasureError>>()?;
                Measure::mixture(parts)
            }
        }
    }

    fn spec_err(reason: &str) -> MeasureError {
        MeasureError::Spec {
            path: "<spec>".to_string(),
            reason: reason.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::enumerate_basis;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_points(rng: &mut StdRng, count: usize, len: usize) -> Vec<HPoint> {
        (0..count)
            .map(|_| HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect()
    }

    #[test]
    fn dirac_moments_are_monomial_values() {
        let z = HPoint::new(vec![0.5, -2.0]);
        let mu = Measure::dirac(z.clone());
        for a in [
            MultiIndex::zero(),
            MultiIndex::from_dense(&[1]),
            MultiIndex::from_dense(&[2, 3]),
        ] {
            assert_eq!(mu.moment(&a), a.eval(&z));
        }
    }

    #[test]
    fn cube_uniform_moment_values() {
        let mu = Measure::cube_uniform();
        // coordinate 1 is uniform on [-1, 1]: second moment 1/3
        assert!((mu.moment(&MultiIndex::from_dense(&[2])) - 1.0 / 3.0).abs() < 1e-15);
        // odd exponent anywhere kills the product
        assert_eq!(mu.moment(&MultiIndex::from_dense(&[2, 1])), 0.0);
        assert_eq!(mu.moment(&MultiIndex::zero()), 1.0);
        // coordinate 2 is uniform on [-1/2, 1/2]: fourth moment (1/2)^4/5
        let quartic = mu.moment(&MultiIndex::from_dense(&[0, 4]));
        assert!((quartic - 0.5f64.powi(4) / 5.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_rule_double_factorial() {
        let mu = Measure::gaussian(2.0).unwrap();
        // coordinate 1 has variance 1: E t^6 = 5!! = 15
        assert!((mu.moment(&MultiIndex::from_dense(&[6])) - 15.0).abs() < 1e-12);
        // coordinate 2 has variance 2^-2 = 1/4: E t^2 = 1/4
        assert!((mu.moment(&MultiIndex::from_dense(&[0, 2])) - 0.25).abs() < 1e-15);
        assert_eq!(mu.moment(&MultiIndex::from_dense(&[1])), 0.0);
        assert!(Measure::gaussian(1.0).is_err());
    }

    #[test]
    fn mixture_moments_are_linear() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = Measure::empirical(random_points(&mut rng, 5, 3)).unwrap();
        let b = Measure::cube_uniform();
        let mix = Measure::mixture(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        for _ in 0..30 {
            let idx = MultiIndex::new(
                (0..rng.gen_range(0..3)).map(|_| (rng.gen_range(1..4), rng.gen_range(1..4))),
            );
            let expect = 0.25 * a.moment(&idx) + 0.75 * b.moment(&idx);
            assert!((mix.moment(&idx) - expect).abs() < 1e-14);
        }
        assert_eq!(mix.moment(&MultiIndex::zero()), 1.0);
    }

    #[test]
    fn weight_validation() {
        let pts = vec![HPoint::new(vec![1.0]), HPoint::new(vec![2.0])];
        assert!(Measure::empirical_weighted(pts.clone(), vec![0.5, 0.5]).is_ok());
        assert!(matches!(
            Measure::empirical_weighted(pts.clone(), vec![0.9, 0.2]),
            Err(MeasureError::WeightSum(_))
        ));
        assert!(matches!(
            Measure::empirical_weighted(pts.clone(), vec![1.2, -0.2]),
            Err(MeasureError::NonPositiveWeight(_))
        ));
        assert!(matches!(
            Measure::empirical_weighted(pts, vec![1.0]),
            Err(MeasureError::WeightCount { .. })
        ));
        assert!(matches!(
            Measure::empirical(vec![]),
            Err(MeasureError::EmptySupport)
        ));
        assert!(matches!(
            Measure::mixture(vec![]),
            Err(MeasureError::EmptyMixture)
        ));
    }

    #[test]
    fn integrate_poly_matches_pointwise_evaluation() {
        let mut rng = StdRng::seed_from_u64(11);
        let basis = enumerate_basis(3, 2).unwrap();
        for _ in 0..20 {
            let pts = random_points(&mut rng, 12, 3);
            let mu = Measure::empirical(pts.clone()).unwrap();
            let coeffs: Vec<f64> =
                (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let via_moments = mu.integrate_poly(&coeffs, &basis);
            let eval = |x: &HPoint| -> f64 {
                coeffs
                    .iter()
                    .zip(basis.iter())
                    .map(|(c, a)| c * a.eval(x))
                    .sum()
            };
            let pointwise: f64 = pts.iter().map(|x| eval(x) / pts.len() as f64).sum();
            assert!((via_moments - pointwise).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_poly_basics() {
        let basis = enumerate_basis(1, 1).unwrap();
        let mu = Measure::cube_uniform();
        assert!((mu.integrate_poly(&[1.0, 0.0], &basis) - 1.0).abs() < 1e-15);
        // p = x1 under a symmetric product rule
        assert_eq!(mu.integrate_poly(&[0.0, 1.0], &basis), 0.0);
    }

    #[test]
    fn integrate_sq_matches_pointwise_and_is_nonnegative() {
        let mut rng = StdRng::seed_from_u64(19);
        let basis = enumerate_basis(2, 2).unwrap();
        for _ in 0..20 {
            let pts = random_points(&mut rng, 9, 2);
            let mu = Measure::empirical(pts.clone()).unwrap();
            let coeffs: Vec<f64> =
                (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sq = mu.integrate_sq(&coeffs, &basis);
            let eval = |x: &HPoint| -> f64 {
                coeffs
                    .iter()
                    .zip(basis.iter())
                    .map(|(c, a)| c * a.eval(x))
                    .sum()
            };
            let pointwise: f64 =
                pts.iter().map(|x| eval(x).powi(2) / pts.len() as f64).sum();
            assert!((sq - pointwise).abs() < 1e-11);
            assert!(sq >= -1e-10);
        }
        let zero = vec![0.0; basis.len()];
        assert_eq!(Measure::cube_uniform().integrate_sq(&zero, &basis), 0.0);
        let mut one = vec![0.0; basis.len()];
        one[0] = 1.0;
        assert!((Measure::cube_uniform().integrate_sq(&one, &basis) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_moments_are_nonnegative() {
        let mut rng = StdRng::seed_from_u64(23);
        let mu = Measure::empirical(random_points(&mut rng, 7, 4)).unwrap();
        for _ in 0..50 {
            let a = MultiIndex::new(
                (0..rng.gen_range(0..3)).map(|_| (rng.gen_range(1..5), rng.gen_range(1..3))),
            );
            assert!(mu.moment(&a.add(&a)) >= 0.0);
        }
    }

    #[test]
    fn atom_mass_finds_explicit_atoms() {
        let z = HPoint::new(vec![0.25, -0.1]);
        let cloud = vec![HPoint::new(vec![0.4, 0.4]), HPoint::new(vec![-0.3, 0.2])];
        let mix = Measure::mixture(vec![
            (0.3, Measure::dirac(z.clone())),
            (0.7, Measure::empirical(cloud).unwrap()),
        ])
        .unwrap();
        assert!((mix.atom_mass(&z) - 0.3).abs() < 1e-15);
        // truncation-insensitive match
        let z_padded = HPoint::new(vec![0.25, -0.1, 0.0, 0.0]);
        assert!((mix.atom_mass(&z_padded) - 0.3).abs() < 1e-15);
        assert_eq!(mix.atom_mass(&HPoint::new(vec![9.0])), 0.0);
        assert_eq!(Measure::cube_uniform().atom_mass(&z), 0.0);
    }

    #[test]
    fn spec_round_trip_and_build() {
        let dir = std::env::temp_dir().join(format!("christoffel-spec-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("pts.csv"), "0.1,0.2\n0.3,0.4\n").unwrap();

        let spec = MeasureSpec::from_json(
            r#"{"type":"mixture","components":[
                {"weight":0.3,"measure":{"type":"atom","point":[0.25,-0.1]}},
                {"weight":0.7,"measure":{"type":"empirical","data":"pts.csv"}}
            ]}"#,
        )
        .unwrap();
        let mu = spec.build(&dir).unwrap();
        assert!((mu.atom_mass(&HPoint::new(vec![0.25, -0.1])) - 0.3).abs() < 1e-15);
        assert_eq!(mu.moment(&MultiIndex::zero()), 1.0);

        assert!(MeasureSpec::from_json(r#"{"type":"nope"}"#).is_err());
        let missing = MeasureSpec::from_json(r#"{"type":"empirical"}"#).unwrap();
        assert!(missing.build(&dir).is_err());

        let cube = MeasureSpec::from_json(r#"{"type":"cube_uniform","n_trunc":4}"#)
            .unwrap()
            .build(&dir)
            .unwrap();
        assert_eq!(cube, Measure::cube_uniform());

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn describe_strings() {
        let mu = Measure::mixture(vec![
            (0.5, Measure::dirac(HPoint::new(vec![1.0]))),
            (0.5, Measure::cube_uniform()),
        ])
        .unwrap();
        assert_eq!(mu.describe(), "mixture(0.5*empirical(n=1) + 0.5*cube_uniform)");
    }
}
