//! Finite-order checks of the asymptotic behaviour of the Christoffel
//! function: convergence to atom masses and exponential growth of the CD
//! polynomial away from the support.
//!
//! Nothing here takes a limit. The joint order parameter is
//! `min(d, n)`; along a schedule the Christoffel value at an atom is
//! nonincreasing and floored by the atom mass, and outside the support
//! the CD polynomial dominates `2^(db*d - 3)` with
//! `db = delta/(delta + diam X)` once a separation
//! `min_{x in X} |pi_n(x - z)| >= delta > 0` is certified. Both facts come
//! with computable witnesses: the polynomial `(1 - |pi_n(x - z)|^2)^d` gives
//! an upper bound on the Christoffel value at `z`, and a scaled Chebyshev
//! polynomial drives the lower bound.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cdkernel::{fit, FitOptions, KernelError};
use crate::fmt_f64;
use crate::hilbert::{CompactSet, HPoint};
use crate::measures::{Measure, ProductRule};

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(
        "witness invalid for this geometry: sup |pi_n(x-z)| = {sup} > 1 over the support"
    )]
    WitnessInvalid { sup: f64 },
    #[error("support of the measure is not bounded; cannot certify the witness")]
    UnboundedSupport,
    #[error("measure has no atom at the requested point")]
    AtomNotFound,
    #[error("separation uncertifiable: {detail}")]
    DeltaUncertifiable { detail: String },
    #[error("empirical point {index} lies outside the declared support set")]
    SupportViolation { index: usize },
    #[error("cannot verify that this measure is supported on the declared set")]
    UnsupportedSupport,
    #[error("schedule must be nonempty and strictly increasing in {0}")]
    BadSchedule(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Chebyshev polynomial of the first kind by the three-term recurrence
/// `T_0 = 1`, `T_1 = t`, `T_{k+1} = 2 t T_k - T_{k-1}`; valid for all real
/// `t`, matching `cos(d * arccos t)` on `[-1, 1]`.
pub fn chebyshev_t(d: u32, t: f64) -> f64 {
    match d {
        0 => 1.0,
        1 => t,
        _ => {
            let mut prev = 1.0;
            let mut cur = t;
            for _ in 1..d {
                (prev, cur) = (cur, 2.0 * t * cur - prev);
            }
            cur
        }
    }
}

/// The scaled Chebyshev step `q(t) = T_d(1 + delta^2 - t^2) / T_d(1 + delta^2)`
/// as a function of the projected norm `t = |pi_n(x)|`. It equals 1 at
/// `t = 0`, stays within `[-1, 1]` for `t <= 1`, and is crushed below
/// `2^(1 - delta*d)` on `delta <= t <= 1`.
pub fn chebyshev_witness_q(d: u32, delta: f64, t: f64) -> f64 {
    chebyshev_t(d, 1.0 + delta * delta - t * t) / chebyshev_t(d, 1.0 + delta * delta)
}

/// The growth floor `2^(db*d - 3)` with `db = delta/(delta + diam)`.
pub fn growth_lower_bound(delta: f64, diam: f64, d: u32) -> f64 {
    assert!(delta > 0.0, "delta must be positive");
    assert!(diam > 0.0, "diameter must be positive");
    assert!(d >= 1, "degree must be at least 1");
    let db = delta / (delta + diam);
    (db * d as f64 - 3.0).exp2()
}

/// `sup^2 of |pi_n(x - z)|` over the support of `mu`, exactly for empirical
/// and cube-product measures.
fn witness_sup_sq(mu: &Measure, z: &HPoint, n: u32) -> Result<f64, AsymptoticsError> {
    match mu {
        Measure::Empirical { points, .. } => Ok(points
            .iter()
            .map(|x| x.sub(z).project(n).norm_sq())
            .fold(0.0f64, f64::max)),
        Measure::Product(ProductRule::CubeUniform) => Ok((1..=n)
            .map(|k| {
                let reach = 1.0 / k as f64 + z.coeff(k).abs();
                reach * reach
            })
            .sum()),
        Measure::Product(ProductRule::Gaussian { .. }) => {
            Err(AsymptoticsError::UnboundedSupport)
        }
        Measure::Mixture(parts) => parts
            .iter()
            .map(|(_, m)| witness_sup_sq(m, z, n))
            .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v))),
    }
}

/// `E[(x_k - z_k)^p]` for one coordinate of a product measure.
fn shifted_coordinate_moment(rule: &ProductRule, k: u32, p: u32, zk: f64) -> f64 {
    (0..=p)
        .map(|s| {
            binom_f64(p, s) * rule.coordinate_moment(k, s) * (-zk).powi((p - s) as i32)
        })
        .sum()
}

fn binom_f64(n: u32, k: u32) -> f64 {
    crate::multiindex::binomial(n as u64, k.min(n - k) as u64)
        .map(|v| v as f64)
        .unwrap_or(f64::INFINITY)
}

/// `integral of (1 - |pi_n(x - z)|^2)^(2d) d(mu)` without certification.
fn witness_integral(mu: &Measure, z: &HPoint, d: u32, n: u32) -> f64 {
    match mu {
        Measure::Empirical { points, weights } => points
            .iter()
            .zip(weights)
            .map(|(x, w)| w * (1.0 - x.sub(z).project(n).norm_sq()).powi(2 * d as i32))
            .sum(),
        Measure::Product(rule) => {
            // write (1 - t)^(2d) = sum_j c_j t^j with t = sum_k (x_k - z_k)^2
            // and integrate one coordinate at a time:
            // E[f(R_k + t')] = sum_j c_j sum_{i<=j} C(j,i) E[R_k^i] t'^(j-i)
            let deg = 2 * d as usize;
            let mut coeffs: Vec<f64> = (0..=deg)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binom_f64(deg as u32, j as u32)
                })
                .collect();
            for k in 1..=n {
                let mut folded = vec![0.0; deg + 1];
                for (j, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for i in 0..=j {
                        let ev = shifted_coordinate_moment(rule, k, 2 * i as u32, z.coeff(k));
                        folded[j - i] += c * binom_f64(j as u32, i as u32) * ev;
                    }
                }
                coeffs = folded;
            }
            coeffs[0]
        }
        Measure::Mixture(parts) => parts
            .iter()
            .map(|(w, m)| w * witness_integral(m, z, d, n))
            .sum(),
    }
}

/// Evaluates the witness bound on the Christoffel function of order
/// `(2d, n)` at a support point `z`: the polynomial
/// `(1 - |pi_n(x - z)|^2)^d` equals 1 at `z`, so the integral of its square
/// dominates `C_{2d,n}(z)`. The bound is certified only when
/// `|pi_n(x - z)| <= 1` over the whole support; otherwise the polynomial is
/// not a bound at all and the call refuses.
pub fn witness_upper_bound(
    mu: &Measure,
    z: &HPoint,
    d: u32,
    n: u32,
) -> Result<f64, AsymptoticsError> {
    let sup_sq = witness_sup_sq(mu, z, n)?;
    if sup_sq > 1.0 {
        return Err(AsymptoticsError::WitnessInvalid { sup: sup_sq.sqrt() });
    }
    Ok(witness_integral(mu, z, d, n))
}

/// How a separation value was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertMethod {
    /// Closed form, tight for the geometry.
    Exact,
    /// Closed form, valid but possibly loose.
    Conservative,
    /// Sampled minimum minus a three-sigma margin; not a proof.
    Heuristic,
}

impl std::fmt::Display for CertMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CertMethod::Exact => write!(f, "exact"),
            CertMethod::Conservative => write!(f, "conservative"),
            CertMethod::Heuristic => write!(f, "heuristic"),
        }
    }
}

/// A certified lower bound on `min_{x in X} |pi_n(x - z)|`.
#[derive(Debug, Clone, Copy)]
pub struct DeltaCertificate {
    pub delta: f64,
    pub method: CertMethod,
}

/// Certifies a positive separation between `z` and the projection of `X`
/// onto the first `n` coordinates.
///
/// Ball and Hilbert cube have exact closed forms (the projected set is a
/// ball resp. a box). The ellipsoid uses the bounding-ball form
/// `|pi_n z| - 1/sqrt(p_1)` when positive and otherwise falls back to a
/// sampled minimum minus three standard deviations of batch minima, labeled
/// heuristic.
pub fn certify_delta(
    set: &CompactSet,
    z: &HPoint,
    n: u32,
    heuristic_seed: u64,
) -> Result<DeltaCertificate, AsymptoticsError> {
    let uncert = |detail: String| AsymptoticsError::DeltaUncertifiable { detail };
    match set {
        CompactSet::Ball { center, radius } => {
            let delta = center.sub(z).project(n).norm() - radius;
            if delta > 0.0 {
                Ok(DeltaCertificate {
                    delta,
                    method: CertMethod::Exact,
                })
            } else {
                Err(uncert(format!(
                    "projected distance to the ball center minus radius is {delta}"
                )))
            }
        }
        CompactSet::HilbertCube => {
            let dist_sq: f64 = (1..=n)
                .map(|k| {
                    let overhang = (z.coeff(k).abs() - 1.0 / k as f64).max(0.0);
                    overhang * overhang
                })
                .sum();
            let delta = dist_sq.sqrt();
            if delta > 0.0 {
                Ok(DeltaCertificate {
                    delta,
                    method: CertMethod::Exact,
                })
            } else {
                Err(uncert("z lies inside the projected cube".to_string()))
            }
        }
        CompactSet::Ellipsoid { weights } => {
            let conservative = z.project(n).norm() - 1.0 / weights.weight(1).sqrt();
            if conservative > 0.0 {
                return Ok(DeltaCertificate {
                    delta: conservative,
                    method: CertMethod::Conservative,
                });
            }
            // sampled fallback with a 3-sigma margin over batch minima
            let batches = 20;
            let per_batch = 1_000;
            let mut rng = ChaCha8Rng::seed_from_u64(heuristic_seed);
            let mut minima = Vec::with_capacity(batches);
            for _ in 0..batches {
                let pts = set.sample(n.max(1), per_batch, rng.next_u64());
                let m = pts
                    .iter()
                    .map(|x| x.sub(z).project(n).norm())
                    .fold(f64::INFINITY, f64::min);
                minima.push(m);
            }
            let overall = minima.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = minima.iter().sum::<f64>() / batches as f64;
            let var = minima.iter().map(|m| (m - mean).powi(2)).sum::<f64>()
                / (batches as f64 - 1.0);
            let delta = overall - 3.0 * var.sqrt();
            if delta > 0.0 {
                Ok(DeltaCertificate {
                    delta,
                    method: CertMethod::Heuristic,
                })
            } else {
                Err(uncert(format!(
                    "sampled minimum {overall} minus margin is not positive"
                )))
            }
        }
    }
}

use rand::RngCore;

/// One fitted order along a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub d: u32,
    pub n: u32,
    /// Christoffel value (atom sweeps) or CD polynomial value (outside
    /// sweeps); NaN when the fit failed.
    pub value: f64,
    /// Atom mass (atom sweeps) or growth floor (outside sweeps).
    pub reference: f64,
    pub pass: bool,
    pub error: Option<String>,
}

impl SweepEntry {
    pub fn d_min_n(&self) -> u32 {
        self.d.min(self.n)
    }
}

/// Outcome of a sweep over fitting orders.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Atom mass or certified separation target the values are checked
    /// against.
    pub target: f64,
    /// Pairs of comparable orders where the expected monotonicity failed.
    pub monotone_violations: usize,
    pub certificate: Option<DeltaCertificate>,
}

impl SweepResult {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// CSV columns `d,n,d_min_n,value,reference,pass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "d,n,d_min_n,value,reference,pass")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.d,
                e.n,
                e.d_min_n(),
                fmt_f64(e.value),
                fmt_f64(e.reference),
                e.pass
            )?;
        }
        Ok(())
    }
}

/// Sweep controls; the tolerance absorbs roundoff in the monotonicity and
/// floor comparisons, and the seed drives heuristic certification only.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub fit: FitOptions,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            tol: 1e-9,
            seed: 42,
        }
    }
}

/// Tracks the Christoffel value at an explicit atom of `mu` along a schedule
/// of orders with strictly increasing `min(d, n)`. Values are nonincreasing
/// in the componentwise order and never drop below the atom mass; fit
/// failures are recorded per entry and the sweep continues.
pub fn sweep_atom(
    mu: &Measure,
    z: &HPoint,
    schedule: &[(u32, u32)],
    opts: &SweepOptions,
) -> Result<SweepResult, AsymptoticsError> {
    let mass = mu.atom_mass(z);
    if mass <= 0.0 {
        return Err(AsymptoticsError::AtomNotFound);
    }
    if schedule.is_empty()
        || schedule.windows(2).any(|w| w[0].0.min(w[0].1) >= w[1].0.min(w[1].1))
    {
        return Err(AsymptoticsError::BadSchedule("min(d, n)"));
    }
    let mut entries = Vec::with_capacity(schedule.len());
    for &(d, n) in schedule {
        match fit(mu, d, n, &opts.fit).and_then(|m| m.christoffel(z)) {
            Ok(value) => entries.push(SweepEntry {
                d,
                n,
                value,
                reference: mass,
                pass: value.is_finite() && value >= mass - opts.tol,
                error: None,
            }),
            Err(e) => entries.push(SweepEntry {
                d,
                n,
                value: f64::NAN,
                reference: mass,
                pass: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let monotone_violations = count_monotone_violations(&entries, opts.tol);
    Ok(SweepResult {
        entries,
        target: mass,
        monotone_violations,
        certificate: None,
    })
}

/// Violations of "nonincreasing in the componentwise order on (d, n)".
fn count_monotone_violations(entries: &[SweepEntry], tol: f64) -> usize {
    let mut count = 0;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let (a, b) = (&entries[i], &entries[j]);
            if !a.value.is_finite() || !b.value.is_finite() {
                continue;
            }
            if b.d >= a.d && b.n >= a.n && b.value > a.value + tol * (1.0 + a.value.abs()) {
                count += 1;
            }
        }
    }
    count
}

fn check_supported_on(mu: &Measure, set: &CompactSet) -> Result<(), AsymptoticsError> {
    match mu {
        Measure::Empirical { points, .. } => {
            for (index, p) in points.iter().enumerate() {
                if !set.contains(p) {
                    return Err(AsymptoticsError::SupportViolation { index });
                }
            }
            Ok(())
        }
        Measure::Product(ProductRule::CubeUniform) => {
            if matches!(set, CompactSet::HilbertCube) {
                Ok(())
            } else {
                Err(AsymptoticsError::UnsupportedSupport)
            }
        }
        Measure::Product(ProductRule::Gaussian { .. }) => {
            Err(AsymptoticsError::UnboundedSupport)
        }
        Measure::Mixture(parts) => parts
            .iter()
            .try_for_each(|(_, m)| check_supported_on(m, set)),
    }
}

/// Checks the exponential growth floor of the CD polynomial at a point `z`
/// separated from the support set `X`: for each degree in `d_range`
/// (strictly increasing, harmonic degree fixed at `n`), the fitted
/// `p_{d,n}(z)` must dominate `2^(db*d - 3)`. The separation is certified
/// from the set geometry before any fitting; empirical measures are checked
/// to actually live inside `X`.
pub fn sweep_outside(
    mu: &Measure,
    set: &CompactSet,
    z: &HPoint,
    n: u32,
    d_range: &[u32],
    opts: &SweepOptions,
) -> Result<SweepResult, AsymptoticsError> {
    if d_range.is_empty() || d_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AsymptoticsError::BadSchedule("d"));
    }
    check_supported_on(mu, set)?;
    let cert = certify_delta(set, z, n, opts.seed)?;
    let diam = set.diameter();
    let mut entries = Vec::with_capacity(d_range.len());
    for &d in d_range {
        let reference = if d >= 1 {
            growth_lower_bound(cert.delta, diam, d)
        } else {
            f64::NAN
        };
        match fit(mu, d, n, &opts.fit) {
            Ok(model) => {
                let value = model.cd_polynomial(z);
                entries.push(SweepEntry {
                    d,
                    n,
                    value,
                    reference,
                    pass: value.is_finite() && value >= reference,
                    error: None,
                });
            }
            Err(e) => entries.push(SweepEntry {
                d,
                n,
                value: f64::NAN,
                reference,
                pass: false,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepResult {
        entries,
        target: cert.delta,
        monotone_violations: 0,
        certificate: Some(cert),
    })
}

/// Convenience: the diagonal schedule `d = n` over the given orders.
pub fn diagonal_schedule(orders: &[u32]) -> Vec<(u32, u32)> {
    orders.iter().map(|&k| (k, k)).collect()
}
