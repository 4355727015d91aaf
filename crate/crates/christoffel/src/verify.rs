//! Seeded verification suites for the library's exact identities.
//!
//! Each check fits real models and measures the worst deviation from an
//! identity that holds exactly in real arithmetic: the reproducing property
//! of the kernel, the trace/average identity, the closed form of the
//! Christoffel function against an independent quadratic-program solve,
//! monotonicity in the order, the Chebyshev recurrence against its
//! trigonometric form, and the compact-set tail bounds against sampling.
//! The CLI `verify` command prints one line per check; the acceptance test
//! suite runs the same checks at larger instance counts.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::asymptotics::{chebyshev_t, chebyshev_witness_q};
use crate::cdkernel::{christoffel_qp_oracle, fit, CDModel, FitOptions};
use crate::hilbert::{CompactSet, HPoint};
use crate::measures::Measure;
use crate::multiindex::binomial;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub duration: Duration,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{:<22} {}  [{:.3}s]  {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.duration.as_secs_f64(),
            self.detail
        )
    }
}

/// Instance counts for the suites; the defaults keep `verify` fast, the
/// acceptance suite raises them.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Number of seeded empirical measures in the model grid.
    pub empirical_measures: usize,
    /// Random (polynomial, point) pairs per fitted model.
    pub reproducing_pairs: usize,
    /// Seeded instances for the quadratic-program cross-check.
    pub qp_instances: usize,
    /// Monte-Carlo samples per set/order for the tail bounds.
    pub tail_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            empirical_measures: 4,
            reproducing_pairs: 100,
            qp_instances: 60,
            tail_samples: 10_000,
        }
    }
}

/// Runs every suite.
pub fn default_suite(cfg: &VerifyConfig) -> Vec<CheckReport> {
    vec![
        check_reproducing_property(cfg),
        check_trace_identity(cfg),
        check_qp_oracle_match(cfg),
        check_monotonicity(cfg),
        check_chebyshev_identity(),
        check_tail_bounds(cfg),
    ]
}

fn timed(
    name: &'static str,
    body: impl FnOnce() -> (bool, String),
) -> CheckReport {
    let start = Instant::now();
    let (passed, detail) = body();
    CheckReport {
        name,
        passed,
        detail,
        duration: start.elapsed(),
    }
}

/// Empirical measures used across the model-grid checks: `count` clouds of
/// 40 points with truncation 3, coefficients uniform in `[-1, 1]`.
fn grid_measures(seed: u64, count: usize) -> Vec<Measure> {
    (0..count)
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_add(i as u64));
            Measure::empirical(
                (0..40)
                    .map(|_| {
                        HPoint::new((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    })
                    .collect(),
            )
            .unwrap()
        })
        .collect()
}

fn grid_fit(mu: &Measure, d: u32, n: u32) -> Option<CDModel> {
    // analytic product fits at higher orders have tiny but genuinely
    // positive trailing eigenvalues; a tighter tolerance keeps them
    let opts = FitOptions {
        rank_tol: 1e-13,
        ..FitOptions::default()
    };
    fit(mu, d, n, &opts).ok()
}

/// `<p, K(., y)>_mu = p(y)` for random polynomials and points, over every
/// fitted model in the grid. Empirical inner products are evaluated
/// pointwise, which never touches the factorization being tested; product
/// measures integrate through fresh moment evaluations.
pub fn check_reproducing_property(cfg: &VerifyConfig) -> CheckReport {
    timed("reproducing-property", || {
        let mut rng = StdRng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
        let mut worst: f64 = 0.0;
        let mut models = 0usize;
        let mut measures = grid_measures(cfg.seed, cfg.empirical_measures);
        measures.push(Measure::cube_uniform());
        for mu in &measures {
            for d in 1..=3u32 {
                for n in 1..=3u32 {
                    let Some(model) = grid_fit(mu, d, n) else {
                        return (false, format!("fit failed at d={d} n={n}"));
                    };
                    models += 1;
                    let size = model.basis().len();
                    let fact = model.factorization();

                    // precomputations for the pointwise route
                    let pointwise = match mu {
                        Measure::Empirical { points, weights } => {
                            let b = DMatrix::from_columns(
                                &points
                                    .iter()
                                    .map(|x| model.basis().eval_monomials(x))
                                    .collect::<Vec<_>>(),
                            );
                            let proj = fact.q().transpose() * &b;
                            Some((b, proj, weights.clone()))
                        }
                        _ => None,
                    };

                    for _ in 0..cfg.reproducing_pairs {
                        let p = DVector::from_iterator(
                            size,
                            (0..size).map(|_| rng.gen_range(-1.0..1.0)),
                        );
                        let y = HPoint::new(
                            (0..n as usize).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        );
                        let by = model.basis().eval_monomials(&y);
                        let p_at_y = p.dot(&by);
                        let lhs = match &pointwise {
                            Some((b, proj, weights)) => {
                                let mut vy = fact.q().transpose() * &by;
                                for (j, s) in fact.eigenvalues().iter().enumerate() {
                                    vy[j] = if *s > 0.0 { vy[j] / s } else { 0.0 };
                                }
                                let pvals = b.transpose() * &p;
                                let kvals = proj.transpose() * vy;
                                pvals
                                    .iter()
                                    .zip(kvals.iter())
                                    .zip(weights)
                                    .map(|((pv, kv), w)| w * pv * kv)
                                    .sum::<f64>()
                            }
                            None => {
                                let ck = fact
                                    .apply_inverse(&by, model.mode())
                                    .expect("full-rank grid fit");
                                mu.integrate_product(
                                    p.as_slice(),
                                    ck.as_slice(),
                                    model.basis(),
                                )
                            }
                        };
                        let err = (lhs - p_at_y).abs() / (1.0 + p_at_y.abs());
                        worst = worst.max(err);
                    }
                }
            }
        }
        (
            worst <= 1e-8,
            format!("{models} models, worst relative residual {worst:.3e}"),
        )
    })
}

/// `integral of p_{d,n} d(mu) = C(n+d, n)` through the trace route and, for
/// empirical measures, through the mean of the scores over the training
/// points.
pub fn check_trace_identity(cfg: &VerifyConfig) -> CheckReport {
    timed("trace-identity", || {
        let mut worst_trace: f64 = 0.0;
        let mut worst_mean: f64 = 0.0;
        let mut measures = grid_measures(cfg.seed, cfg.empirical_measures);
        measures.push(Measure::cube_uniform());
        for mu in &measures {
            for d in 1..=3u32 {
                for n in 1..=3u32 {
                    let dim = binomial((d + n) as u64, n as u64).unwrap() as f64;
                    let Some(model) = grid_fit(mu, d, n) else {
                        return (false, format!("fit failed at d={d} n={n}"));
                    };
                    let avg = match model.average_cd(mu) {
                        Ok(v) => v,
                        Err(e) => return (false, format!("average failed: {e}")),
                    };
                    worst_trace = worst_trace.max((avg - dim).abs() / dim);
                    if let Measure::Empirical { points, .. } = mu {
                        let scores = model.score(points);
                        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                        worst_mean = worst_mean.max((mean - dim).abs());
                    }
                }
            }
        }
        (
            worst_trace <= 1e-9 && worst_mean <= 1e-6,
            format!(
                "worst trace deviation {worst_trace:.3e} (rel), worst score-mean deviation {worst_mean:.3e}"
            ),
        )
    })
}

/// The closed form `C(z) = 1/K(z, z)` against the bordered-system solve of
/// the defining quadratic program, plus the optimality certificates of the
/// returned minimizer.
pub fn check_qp_oracle_match(cfg: &VerifyConfig) -> CheckReport {
    timed("qp-oracle-match", || {
        let mut rng = StdRng::seed_from_u64(cfg.seed ^ 0x5eed_0002);
        let mut worst_value: f64 = 0.0;
        let mut worst_at_z: f64 = 0.0;
        let mut worst_integral: f64 = 0.0;
        let mut done = 0usize;
        while done < cfg.qp_instances {
            let len = rng.gen_range(1..4usize);
            let d = rng.gen_range(1..4u32);
            let n = rng.gen_range(1..=len as u32);
            let dim = binomial((d + n) as u64, n as u64).unwrap() as usize;
            let extra = rng.gen_range(5..25);
            let mu = Measure::empirical(
                (0..dim + extra)
                    .map(|_| {
                        HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    })
                    .collect(),
            )
            .unwrap();
            let z = HPoint::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let Some(model) = grid_fit(&mu, d, n) else {
                continue;
            };
            let closed = model.christoffel(&z).expect("full-rank model");
            let qp = match christoffel_qp_oracle(&mu, d, n, &z) {
                Ok(qp) => qp,
                Err(e) => return (false, format!("oracle failed: {e}")),
            };
            worst_value =
                worst_value.max((closed - qp.value).abs() / closed.abs().max(qp.value.abs()));

            let coeffs = model.minimizer(&z).expect("full-rank model");
            let at_z: f64 = coeffs
                .iter()
                .zip(model.basis().iter())
                .map(|(c, a)| c * a.eval(&z))
                .sum();
            worst_at_z = worst_at_z.max((at_z - 1.0).abs());
            let integral = mu.integrate_sq(&coeffs, model.basis());
            worst_integral = worst_integral.max((integral - closed).abs() / (1.0 + closed));
            done += 1;
        }
        (
            worst_value <= 1e-8 && worst_at_z <= 1e-10 && worst_integral <= 1e-8,
            format!(
                "{done} instances, worst value gap {worst_value:.3e}, constraint residual {worst_at_z:.3e}, integral gap {worst_integral:.3e}"
            ),
        )
    })
}

/// The Christoffel function shrinks when the order grows: over a 4x4 grid
/// of orders on one measure, every componentwise-comparable pair must be
/// nonincreasing at random evaluation points.
pub fn check_monotonicity(cfg: &VerifyConfig) -> CheckReport {
    timed("order-monotonicity", || {
        let mut rng = StdRng::seed_from_u64(cfg.seed ^ 0x5eed_0003);
        let mu = Measure::empirical(
            (0..130)
                .map(|_| HPoint::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
                .collect(),
        )
        .unwrap();
        let zs: Vec<HPoint> = (0..3)
            .map(|_| HPoint::new((0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let mut values = Vec::new();
        for d in 1..=4u32 {
            for n in 1..=4u32 {
                let Some(model) = grid_fit(&mu, d, n) else {
                    return (false, format!("fit failed at d={d} n={n}"));
                };
                let cs: Vec<f64> = zs
                    .iter()
                    .map(|z| model.christoffel(z).expect("full-rank model"))
                    .collect();
                values.push((d, n, cs));
            }
        }
        let mut violations = 0usize;
        let mut worst_gap: f64 = 0.0;
        for (da, na, ca) in &values {
            for (db, nb, cb) in &values {
                if db >= da && nb >= na {
                    for (va, vb) in ca.iter().zip(cb) {
                        let gap = vb - va;
                        if gap > 1e-9 * (1.0 + va.abs()) {
                            violations += 1;
                            worst_gap = worst_gap.max(gap);
                        }
                    }
                }
            }
        }
        (
            violations == 0,
            format!("{violations} violations over a 4x4 order grid (worst gap {worst_gap:.3e})"),
        )
    })
}

/// The three-term recurrence against `cos(d arccos t)` on a 1000-point grid
/// for degrees up to 30, plus the step properties of the scaled Chebyshev
/// witness.
pub fn check_chebyshev_identity() -> CheckReport {
    timed("chebyshev-identity", || {
        let mut worst: f64 = 0.0;
        for d in 0..=30u32 {
            for i in 0..1000 {
                let t = -1.0 + 2.0 * i as f64 / 999.0;
                let err = (chebyshev_t(d, t) - (d as f64 * t.acos()).cos()).abs();
                worst = worst.max(err);
            }
        }
        let mut witness_ok = true;
        for &delta in &[0.1, 0.3, 0.5, 0.9] {
            for d in 1..=20u32 {
                witness_ok &= (chebyshev_witness_q(d, delta, 0.0) - 1.0).abs() < 1e-12;
                let crush = (1.0 - delta * d as f64).exp2();
                for i in 0..=400 {
                    let t = i as f64 / 400.0;
                    let q = chebyshev_witness_q(d, delta, t).abs();
                    witness_ok &= q <= 1.0 + 1e-10;
                    if t >= delta {
                        witness_ok &= q <= crush * (1.0 + 1e-10);
                    }
                }
            }
        }
        (
            worst <= 1e-10 && witness_ok,
            format!("worst recurrence error {worst:.3e}, witness step bounds {}",
                if witness_ok { "hold" } else { "violated" }),
        )
    })
}

/// Sampled tail energies never exceed the analytic tail bounds, and the
/// cube's witness point `c_k = 1/k` reproduces the partial tail sums
/// exactly.
pub fn check_tail_bounds(cfg: &VerifyConfig) -> CheckReport {
    timed("tail-bounds", || {
        let n_trunc = 60u32;
        let orders = [1u32, 5, 10, 50];
        let sets = [
            CompactSet::ellipsoid(1.0).unwrap(),
            CompactSet::hilbert_cube(),
        ];
        let mut worst_margin = f64::INFINITY;
        for (si, set) in sets.iter().enumerate() {
            let points = set.sample(n_trunc, cfg.tail_samples, cfg.seed + si as u64);
            for &n in &orders {
                let bound = set.tail_bound(n);
                for p in &points {
                    let margin = bound - p.tail_energy(n);
                    if margin < worst_margin {
                        worst_margin = margin;
                    }
                }
            }
        }
        let witness = HPoint::new((1..=n_trunc as usize).map(|k| 1.0 / k as f64).collect());
        let mut witness_exact = CompactSet::hilbert_cube().contains(&witness);
        for &n in &orders {
            let partial: f64 = (n as usize + 1..=n_trunc as usize)
                .map(|k| (1.0 / k as f64).powi(2))
                .sum();
            witness_exact &= witness.tail_energy(n) == partial;
        }
        (
            worst_margin >= 0.0 && witness_exact,
            format!(
                "{} samples per set, smallest bound margin {worst_margin:.3e}, cube witness exact: {witness_exact}",
                cfg.tail_samples
            ),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes_on_default_seed() {
        for report in default_suite(&VerifyConfig::default()) {
            assert!(report.passed, "{}", report.line());
        }
    }

    #[test]
    fn suite_passes_on_other_seeds() {
        for seed in [1u64, 7, 2024] {
            let cfg = VerifyConfig {
                seed,
                empirical_measures: 2,
                reproducing_pairs: 25,
                qp_instances: 15,
                tail_samples: 2_000,
            };
            for report in default_suite(&cfg) {
                assert!(report.passed, "seed {seed}: {}", report.line());
            }
        }
    }
}
