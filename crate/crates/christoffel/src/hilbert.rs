//! Points of a separable Hilbert space and the compact sets used as
//! supports.
//!
//! A point is stored as its finite list of orthonormal-basis coefficients
//! `c_k = <x, e_k>`; coefficients beyond the truncation are zero, so the norm
//! identity `|x|^2 = sum_k c_k^2` holds exactly by representation. The
//! infinite-dimensional structure enters through the set definitions and
//! their tail-energy bounds, not through storage: a set is compact exactly
//! when the energy beyond coordinate `n`, `|x|^2 - |pi_n(x)|^2`, is uniformly
//! small over the set for large `n`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Errors from set construction and point ingestion.
#[derive(Debug, Error)]
pub enum HilbertError {
    #[error("ellipsoid weight exponent must be >= 1, got {0}")]
    InvalidWeightExponent(f64),
    #[error("ball radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("{path}:{line}: {reason}")]
    PointFormat {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A point of `H`, identified with its truncated coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HPoint {
    coeffs: Vec<f64>,
}

impl HPoint {
    /// Wraps a coefficient vector. All entries must be finite.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "HPoint coefficients must be finite"
        );
        Self { coeffs }
    }

    /// The origin with the given truncation length.
    pub fn origin(len: usize) -> Self {
        Self {
            coeffs: vec![0.0; len],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Truncation length `N`: coefficients of `e_k` for `k > N` are zero.
    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient `<x, e_k>` for 1-based `k`; zero beyond the truncation.
    pub fn coeff(&self, k: u32) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k as usize - 1).copied().unwrap_or(0.0)
    }

    /// The projection `pi_n(x)`: coefficients beyond `n` dropped. Idempotent.
    pub fn project(&self, n: u32) -> HPoint {
        let keep = (n as usize).min(self.coeffs.len());
        HPoint {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// Inner product over the common prefix; the shorter vector is
    /// zero-extended.
    pub fn inner(&self, other: &HPoint) -> f64 {
        self.coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Energy beyond coordinate `n`: `sum_{k > n} c_k^2`, summed directly in
    /// ascending `k` so a point built from an explicit tail reproduces the
    /// partial sum bit for bit.
    pub fn tail_energy(&self, n: u32) -> f64 {
        let from = (n as usize).min(self.coeffs.len());
        self.coeffs[from..].iter().map(|c| c * c).sum()
    }

    /// Coefficient-wise difference, zero-extending the shorter vector.
    pub fn sub(&self, other: &HPoint) -> HPoint {
        let len = self.coeffs.len().max(other.coeffs.len());
        HPoint {
            coeffs: (0..len)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        - other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        }
    }

    /// Distance `|x - y|`.
    pub fn dist(&self, other: &HPoint) -> f64 {
        self.sub(other).norm()
    }

    /// Coefficients with trailing zeros removed; two representations of the
    /// same point share this view.
    pub fn trimmed(&self) -> &[f64] {
        let mut end = self.coeffs.len();
        while end > 0 && self.coeffs[end - 1] == 0.0 {
            end -= 1;
        }
        &self.coeffs[..end]
    }

    /// Exact equality as points of `H` (truncation-insensitive).
    pub fn same_point(&self, other: &HPoint) -> bool {
        self.trimmed() == other.trimmed()
    }
}

impl fmt::Display for HPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Weight rule for ellipsoid sets: `p_k = k^m` with `m >= 1`, strictly
/// positive and strictly increasing. `m = 1` recovers `p_k = k`; integer
/// `m` matches Sobolev-norm unit balls of smoothness order `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRule {
    exponent: f64,
}

impl WeightRule {
    pub fn power(exponent: f64) -> Result<Self, HilbertError> {
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(HilbertError::InvalidWeightExponent(exponent));
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `p_k`, 1-based.
    pub fn weight(&self, k: u32) -> f64 {
        (k as f64).powf(self.exponent)
    }
}

/// Compact subsets of `H` with analytic membership, diameter, and
/// tail-energy bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum CompactSet {
    /// `{ x : sum_k p_k <x, e_k>^2 <= 1 }` with increasing weights `p_k`.
    Ellipsoid { weights: WeightRule },
    /// `{ x : |<x, e_k>| <= 1/k for all k }`.
    HilbertCube,
    /// `{ x : |x - center| <= radius }`.
    Ball { center: HPoint, radius: f64 },
}

impl CompactSet {
    pub fn ellipsoid(exponent: f64) -> Result<Self, HilbertError> {
        Ok(CompactSet::Ellipsoid {
            weights: WeightRule::power(exponent)?,
        })
    }

    pub fn hilbert_cube() -> Self {
        CompactSet::HilbertCube
    }

    pub fn ball(center: HPoint, radius: f64) -> Result<Self, HilbertError> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(HilbertError::InvalidRadius(radius));
        }
        Ok(CompactSet::Ball { center, radius })
    }

    /// Membership by the defining inequalities; zero tail coefficients
    /// satisfy every clause, so only the stored prefix is examined.
    pub fn contains(&self, x: &HPoint) -> bool {
        match self {
            CompactSet::Ellipsoid { weights } => {
                let s: f64 = x
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| weights.weight(i as u32 + 1) * c * c)
                    .sum();
                s <= 1.0
            }
            CompactSet::HilbertCube => x
                .coeffs()
                .iter()
                .enumerate()
                .all(|(i, c)| c.abs() <= 1.0 / (i + 1) as f64),
            CompactSet::Ball { center, radius } => x.dist(center) <= *radius,
        }
    }

    /// An upper bound on `sup_{x in X} tail_energy(x, n)`, nonincreasing in
    /// `n`.
    ///
    /// Ellipsoid: the tail energy is at most `1/p_{n+1}` because the weights
    /// increase, which is `1/(n+1)^m` here (for `p_k = k` this is the
    /// telescoping bound `1/(n+1)`). Hilbert cube: `sum_{k>n} 1/k^2`,
    /// over-bounded in closed form by `1/n` for `n >= 1` and `pi^2/6` at
    /// `n = 0`. Ball: the center's own tail plus the radius, squared.
    pub fn tail_bound(&self, n: u32) -> f64 {
        match self {
            CompactSet::Ellipsoid { weights } => 1.0 / weights.weight(n + 1),
            CompactSet::HilbertCube => {
                if n == 0 {
                    std::f64::consts::PI.powi(2) / 6.0
                } else {
                    1.0 / n as f64
                }
            }
            CompactSet::Ball { center, radius } => {
                let t = center.tail_energy(n).sqrt() + radius;
                t * t
            }
        }
    }

    /// `max_{x1, x2 in X} |x1 - x2|`.
    ///
    /// Ball: `2r`. Ellipsoid: twice the longest semi-axis, `2/sqrt(p_1)`.
    /// Hilbert cube: antipodal corners give `2 sqrt(sum 1/k^2) =
    /// 2 sqrt(pi^2/6)`.
    pub fn diameter(&self) -> f64 {
        match self {
            CompactSet::Ellipsoid { weights } => 2.0 / weights.weight(1).sqrt(),
            CompactSet::HilbertCube => 2.0 * (std::f64::consts::PI.powi(2) / 6.0).sqrt(),
            CompactSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Draws `count` member points truncated at `n_trunc`, deterministically
    /// under `seed`. Sampling is membership-valid by construction; exact
    /// distributional uniformity is not promised. Parallel callers should
    /// use disjoint seeds.
    pub fn sample(&self, n_trunc: u32, count: usize, seed: u64) -> Vec<HPoint> {
        assert!(n_trunc >= 1, "n_trunc must be at least 1");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_one(n_trunc, &mut rng)).collect()
    }

    fn sample_one(&self, n_trunc: u32, rng: &mut ChaCha8Rng) -> HPoint {
        let n = n_trunc as usize;
        match self {
            CompactSet::HilbertCube => HPoint::new(
                (1..=n)
                    .map(|k| {
                        let h = 1.0 / k as f64;
                        rng.gen_range(-h..=h)
                    })
                    .collect(),
            ),
            CompactSet::Ellipsoid { weights } => {
                let dir = gaussian_direction(n, rng);
                let t = rng.gen::<f64>().sqrt() * (1.0 - 1e-9);
                HPoint::new(
                    dir.iter()
                        .enumerate()
                        .map(|(i, g)| t * g / weights.weight(i as u32 + 1).sqrt())
                        .collect(),
                )
            }
            CompactSet::Ball { center, radius } => {
                let dir = gaussian_direction(n, rng);
                let t = radius * rng.gen::<f64>().sqrt() * (1.0 - 1e-9);
                HPoint::new(
                    (0..n.max(center.truncation()))
                        .map(|i| {
                            center.coeffs().get(i).copied().unwrap_or(0.0)
                                + t * dir.get(i).copied().unwrap_or(0.0)
                        })
                        .collect(),
                )
            }
        }
    }
}

/// A unit vector from coordinate-wise standard Gaussians.
fn gaussian_direction(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn data_lines(path: &Path) -> Result<Vec<(usize, String)>, HilbertError> {
    let file = File::open(path).map_err(|source| HilbertError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| HilbertError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push((lineno + 1, trimmed.to_string()));
    }
    Ok(lines)
}

fn point_from_coeffs(
    coeffs: Vec<f64>,
    path: &Path,
    line: usize,
) -> Result<HPoint, HilbertError> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(HilbertError::PointFormat {
            path: path.display().to_string(),
            line,
            reason: "non-finite coefficient".to_string(),
        });
    }
    Ok(HPoint::new(coeffs))
}

/// Reads points from CSV: one point per line, comma-separated decimal
/// coefficients. Blank lines and lines starting with `#` are skipped.
pub fn read_points_csv(path: &Path) -> Result<Vec<HPoint>, HilbertError> {
    let mut points = Vec::new();
    for (lineno, line) in data_lines(path)? {
        let coeffs = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| HilbertError::PointFormat {
                path: path.display().to_string(),
                line: lineno,
                reason: e.to_string(),
            })?;
        points.push(point_from_coeffs(coeffs, path, lineno)?);
    }
    Ok(points)
}

/// Reads points from JSONL: one JSON array of numbers per line, with the
/// same blank/comment skipping as the CSV reader.
pub fn read_points_jsonl(path: &Path) -> Result<Vec<HPoint>, HilbertError> {
    let mut points = Vec::new();
    for (lineno, line) in data_lines(path)? {
        let coeffs: Vec<f64> =
            serde_json::from_str(&line).map_err(|e| HilbertError::PointFormat {
                path: path.display().to_string(),
                line: lineno,
                reason: e.to_string(),
            })?;
        points.push(point_from_coeffs(coeffs, path, lineno)?);
    }
    Ok(points)
}

/// Reads points by extension: `.jsonl`/`.ndjson` as JSONL, anything else as
/// CSV.
pub fn read_points(path: &Path) -> Result<Vec<HPoint>, HilbertError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => read_points_jsonl(path),
        _ => read_points_csv(path),
    }
}

/// Writes points as CSV at 17 significant digits.
pub fn write_points_csv(path: &Path, points: &[HPoint]) -> Result<(), HilbertError> {
    let mut file = File::create(path).map_err(|source| HilbertError::Io {
        path: path.display().to_string(),
        source,
    })?;
    for p in points {
        let row: Vec<String> = p.coeffs().iter().map(|c| crate::fmt_f64(*c)).collect();
        writeln!(file, "{}", row.join(",")).map_err(|source| HilbertError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}
