//! Synthetic populations with analytically known Bayes classifiers.
//!
//! Every population draws `X` uniformly from the box `(-1, 1]^d` and flips
//! the Bayes label independently with probability `q` (the Bayes error), so
//! the noise indicator is Bernoulli(q) independent of `X`. The flip flags
//! are recorded at sampling time, which makes purification and per-point
//! signal/noise bookkeeping exact rather than re-derived.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use thiserror::Error;

use crate::seed::rng_from;

/// Class label. All classifiers in this crate are binary with labels +1/-1.
pub type Label = i8;

/// Sign with the fixed tie convention `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> Label {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Recursive XOR label: `xor2(a, b) = -1` iff `a * b >= 0`, and
/// `xor_k(x) = xor2(xor_{k-1}(x_1..x_{k-1}), x_k)`.
///
/// Defined here because two populations (`XorK` and the counterexample
/// machinery) share it; `k >= 2` is required.
pub fn xor_label(k: usize, x: &[f64]) -> Result<Label, PopulationError> {
    if k < 2 {
        return Err(PopulationError::XorOrderTooSmall { k });
    }
    if x.len() != k {
        return Err(PopulationError::DimensionMismatch {
            expected: k,
            got: x.len(),
        });
    }
    let xor2 = |a: f64, b: f64| -> f64 {
        if a * b >= 0.0 {
            -1.0
        } else {
            1.0
        }
    };
    let mut acc = xor2(x[0], x[1]);
    for &xi in &x[2..] {
        acc = xor2(acc, xi);
    }
    Ok(acc as Label)
}

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("bayes error q must lie in [0, 0.5), got {q}")]
    InvalidBayesError { q: f64 },
    #[error("xor population needs k >= 2, got {k}")]
    XorOrderTooSmall { k: usize },
    #[error("point has dimension {got}, population expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set must be non-empty")]
    EmptyTrainingSet,
    #[error("csv: {0}")]
    Csv(String),
}

/// The supported population geometries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationKind {
    /// 2-d, Bayes rule `sign(x1)`.
    HalfPlane2d,
    /// 6-d, Bayes rule `sign(x1 * x2 * x3)`; the last three coordinates are
    /// irrelevant.
    Parity6d,
    /// k-d recursive XOR.
    XorK(usize),
    /// 2-d annulus: +1 iff `0.4 <= |x| <= 0.8`.
    Ring2d,
    /// 2-d diagonal band: +1 iff `|x1 - x2| <= 0.5`.
    Diagonal2d,
}

impl fmt::Display for PopulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PopulationKind::HalfPlane2d => write!(f, "half_plane_2d"),
            PopulationKind::Parity6d => write!(f, "parity_6d"),
            PopulationKind::XorK(k) => write!(f, "xor_{k}"),
            PopulationKind::Ring2d => write!(f, "ring_2d"),
            PopulationKind::Diagonal2d => write!(f, "diagonal_2d"),
        }
    }
}

/// A population: uniform `X` on `(-1, 1]^d`, a total Bayes rule, and an
/// independent label-flip rate `q in [0, 0.5)`.
///
/// Immutable after construction; sampling takes an explicit seed.
#[derive(Debug, Clone)]
pub struct Population {
    kind: PopulationKind,
    dimension: usize,
    bayes_error: f64,
}

impl Population {
    pub fn new(kind: PopulationKind, q: f64) -> Result<Self, PopulationError> {
        if !(0.0..0.5).contains(&q) {
            return Err(PopulationError::InvalidBayesError { q });
        }
        let dimension = match kind {
            PopulationKind::HalfPlane2d | PopulationKind::Ring2d | PopulationKind::Diagonal2d => 2,
            PopulationKind::Parity6d => 6,
            PopulationKind::XorK(k) => {
                if k < 2 {
                    return Err(PopulationError::XorOrderTooSmall { k });
                }
                k
            }
        };
        Ok(Population {
            kind,
            dimension,
            bayes_error: q,
        })
    }

    pub fn kind(&self) -> PopulationKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The Bayes error `q`, which is also the independent label-flip rate.
    pub fn bayes_error(&self) -> f64 {
        self.bayes_error
    }

    /// The Bayes classifier, total on the support. Boundary ties resolve by
    /// `sign(0) = +1`, except XOR whose own definition maps products >= 0
    /// to -1.
    pub fn bayes_label(&self, x: &[f64]) -> Label {
        debug_assert_eq!(x.len(), self.dimension);
        match self.kind {
            PopulationKind::HalfPlane2d => sign(x[0]),
            PopulationKind::Parity6d => sign(x[0] * x[1] * x[2]),
            PopulationKind::XorK(k) => xor_label(k, x).expect("dimension checked at construction"),
            PopulationKind::Ring2d => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if (0.4..=0.8).contains(&r) {
                    1
                } else {
                    -1
                }
            }
            PopulationKind::Diagonal2d => {
                if (x[0] - x[1]).abs() <= 0.5 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    /// Draw one uniform point on `(-1, 1]^d` into `out`.
    #[inline]
    pub fn sample_x<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dimension);
        for v in out.iter_mut() {
            // u in [0, 1) maps to 1 - 2u in (-1, 1].
            let u: f64 = rng.gen();
            *v = 1.0 - 2.0 * u;
        }
    }

    /// Sample `n` labeled points. `y_i` is the Bayes label flipped with
    /// probability `q`; the annotation records exactly which labels were
    /// flipped. Deterministic given the seed.
    pub fn sample(&self, n: usize, seed: u64) -> (TrainingSet, NoiseAnnotation) {
        assert!(n >= 1, "sample size must be >= 1");
        let mut rng = rng_from(seed);
        let d = self.dimension;
        let mut features = vec![0.0f64; n * d];
        let mut labels = vec![0 as Label; n];
        let mut flags = vec![false; n];
        for i in 0..n {
            let row = &mut features[i * d..(i + 1) * d];
            self.sample_x(&mut rng, row);
            let theta = self.bayes_label(row);
            let flip = rng.gen::<f64>() < self.bayes_error;
            labels[i] = if flip { -theta } else { theta };
            flags[i] = flip;
        }
        (
            TrainingSet {
                features,
                labels,
                dimension: d,
            },
            NoiseAnnotation { flags },
        )
    }

    /// Replace every label with the Bayes label at the same input.
    /// Idempotent; the output has zero noise points under this population.
    pub fn purify(&self, t: &TrainingSet) -> TrainingSet {
        let labels = (0..t.len()).map(|i| self.bayes_label(t.point(i))).collect();
        TrainingSet {
            features: t.features.clone(),
            labels,
            dimension: t.dimension,
        }
    }

    /// Re-derive the noise annotation of a set under this population.
    pub fn annotate(&self, t: &TrainingSet) -> NoiseAnnotation {
        let flags = (0..t.len())
            .map(|i| t.label(i) != self.bayes_label(t.point(i)))
            .collect();
        NoiseAnnotation { flags }
    }
}

/// `n` labeled points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<f64>,
    labels: Vec<Label>,
    dimension: usize,
}

impl TrainingSet {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, PopulationError> {
        if rows.is_empty() {
            return Err(PopulationError::EmptyTrainingSet);
        }
        let dimension = rows[0].len();
        let mut features = Vec::with_capacity(rows.len() * dimension);
        for row in &rows {
            if row.len() != dimension {
                return Err(PopulationError::DimensionMismatch {
                    expected: dimension,
                    got: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        assert_eq!(labels.len(), rows.len());
        Ok(TrainingSet {
            features,
            labels,
            dimension,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.features[i * self.dimension..(i + 1) * self.dimension]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Write as CSV: header `x_1,..,x_d,y,is_noise`, one row per point.
    pub fn write_csv<W: Write>(
        &self,
        w: &mut W,
        noise: &NoiseAnnotation,
    ) -> Result<(), std::io::Error> {
        assert_eq!(noise.flags.len(), self.len());
        let header: Vec<String> = (1..=self.dimension)
            .map(|j| format!("x_{j}"))
            .chain(["y".to_string(), "is_noise".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let coords: Vec<String> = self.point(i).iter().map(|v| format!("{v}")).collect();
            writeln!(
                w,
                "{},{},{}",
                coords.join(","),
                self.labels[i],
                noise.flags[i]
            )?;
        }
        Ok(())
    }

    /// Parse the CSV format written by [`TrainingSet::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<(Self, NoiseAnnotation), PopulationError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| PopulationError::Csv("empty file".into()))?
            .map_err(|e| PopulationError::Csv(e.to_string()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[cols.len() - 2] != "y" || cols[cols.len() - 1] != "is_noise" {
            return Err(PopulationError::Csv(format!("bad header: {header}")));
        }
        let dimension = cols.len() - 2;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut flags = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| PopulationError::Csv(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != dimension + 2 {
                return Err(PopulationError::Csv(format!(
                    "row {}: expected {} fields, got {}",
                    lineno + 2,
                    dimension + 2,
                    fields.len()
                )));
            }
            let mut row = Vec::with_capacity(dimension);
            for f in &fields[..dimension] {
                row.push(
                    f.parse::<f64>()
                        .map_err(|e| PopulationError::Csv(format!("row {}: {e}", lineno + 2)))?,
                );
            }
            labels.push(
                fields[dimension]
                    .parse::<i8>()
                    .map_err(|e| PopulationError::Csv(format!("row {}: {e}", lineno + 2)))?,
            );
            flags.push(
                fields[dimension + 1]
                    .parse::<bool>()
                    .map_err(|e| PopulationError::Csv(format!("row {}: {e}", lineno + 2)))?,
            );
            rows.push(row);
        }
        let set = TrainingSet::from_rows(rows, labels)?;
        Ok((set, NoiseAnnotation { flags }))
    }
}

/// Per-point noise flags aligned with a training set: `true` means the
/// sampled label disagrees with the Bayes label at that point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseAnnotation {
    flags: Vec<bool>,
}

impl NoiseAnnotation {
    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn noise_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_bayes_error() {
        assert!(Population::new(PopulationKind::HalfPlane2d, 0.5).is_err());
        assert!(Population::new(PopulationKind::HalfPlane2d, -0.01).is_err());
        assert!(Population::new(PopulationKind::HalfPlane2d, 0.499).is_ok());
        assert!(Population::new(PopulationKind::XorK(1), 0.0).is_err());
    }

    #[test]
    fn half_plane_bayes_rule() {
        let pop = Population::new(PopulationKind::HalfPlane2d, 0.1).unwrap();
        assert_eq!(pop.bayes_error(), 0.1);
        assert_eq!(pop.bayes_label(&[0.3, -0.9]), 1);
        assert_eq!(pop.bayes_label(&[-0.3, 0.9]), -1);
        // sign(0) = +1 convention
        assert_eq!(pop.bayes_label(&[0.0, 0.5]), 1);
    }

    #[test]
    fn parity_bayes_rule() {
        let pop = Population::new(PopulationKind::Parity6d, 0.1).unwrap();
        assert_eq!(pop.bayes_label(&[1.0, 1.0, 1.0, 0.2, -0.3, 0.8]), 1);
        assert_eq!(pop.bayes_label(&[-1.0, 1.0, 1.0, 0.2, -0.3, 0.8]), -1);
    }

    #[test]
    fn xor_recursive_definition() {
        assert_eq!(xor_label(2, &[1.0, -1.0]).unwrap(), 1);
        assert_eq!(xor_label(2, &[0.5, 0.5]).unwrap(), -1);
        // xor3(1,1,1) = xor2(xor2(1,1), 1) = xor2(-1, 1) = +1
        assert_eq!(xor_label(3, &[1.0, 1.0, 1.0]).unwrap(), 1);
        assert!(xor_label(1, &[1.0]).is_err());
        assert_eq!(
            Population::new(PopulationKind::XorK(3), 0.0)
                .unwrap()
                .bayes_label(&[1.0, 1.0, 1.0]),
            1
        );
    }

    /// Independent parity oracle: xor_k(x) = (-1)^(k-1) * prod(sign(x_i)).
    fn parity_oracle(x: &[f64]) -> Label {
        let mut prod: i32 = if (x.len() - 1) % 2 == 1 { -1 } else { 1 };
        for &xi in x {
            prod *= i32::from(sign(xi));
        }
        prod as Label
    }

    #[test]
    fn xor_matches_parity_oracle_on_random_points() {
        for k in 2..=5 {
            let pop = Population::new(PopulationKind::XorK(k), 0.0).unwrap();
            let mut rng = rng_from(7 + k as u64);
            let mut x = vec![0.0; k];
            for _ in 0..10_000 {
                pop.sample_x(&mut rng, &mut x);
                assert_eq!(pop.bayes_label(&x), parity_oracle(&x));
            }
        }
    }

    #[test]
    fn ring_and_diagonal_geometry() {
        let ring = Population::new(PopulationKind::Ring2d, 0.0).unwrap();
        assert_eq!(ring.bayes_label(&[0.5, 0.0]), 1);
        assert_eq!(ring.bayes_label(&[0.1, 0.0]), -1);
        assert_eq!(ring.bayes_label(&[0.9, 0.0]), -1);
        let diag = Population::new(PopulationKind::Diagonal2d, 0.0).unwrap();
        assert_eq!(diag.bayes_label(&[0.2, 0.1]), 1);
        assert_eq!(diag.bayes_label(&[0.9, -0.2]), -1);
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let pop = Population::new(PopulationKind::HalfPlane2d, 0.1).unwrap();
        let (a, na) = pop.sample(500, 99);
        let (b, nb) = pop.sample(500, 99);
        assert_eq!(a, b);
        assert_eq!(na, nb);
        for i in 0..a.len() {
            for &v in a.point(i) {
                assert!(v > -1.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn zero_noise_when_q_is_zero() {
        let pop = Population::new(PopulationKind::Parity6d, 0.0).unwrap();
        let (t, noise) = pop.sample(100, 3);
        assert_eq!(noise.noise_count(), 0);
        for i in 0..t.len() {
            assert_eq!(t.label(i), pop.bayes_label(t.point(i)));
        }
    }

    #[test]
    fn noise_count_tracks_binomial_mean() {
        // Average over many seeds: flag count within 3 standard errors of n*q.
        let pop = Population::new(PopulationKind::HalfPlane2d, 0.1).unwrap();
        let n = 500usize;
        let seeds = 1000u64;
        let total: usize = (0..seeds)
            .map(|s| pop.sample(n, s).1.noise_count())
            .sum();
        let mean = total as f64 / seeds as f64;
        let se = (n as f64 * 0.1 * 0.9 / seeds as f64).sqrt();
        assert!(
            (mean - 50.0).abs() <= 3.0 * se,
            "mean noise count {mean} vs expected 50 (se {se})"
        );
    }

    #[test]
    fn purify_removes_noise_and_is_idempotent() {
        let pop = Population::new(PopulationKind::HalfPlane2d, 0.2).unwrap();
        let (t, noise) = pop.sample(300, 11);
        let p = pop.purify(&t);
        assert_eq!(pop.annotate(&p).noise_count(), 0);
        for i in 0..t.len() {
            assert_eq!(p.point(i), t.point(i));
            if noise.flags()[i] {
                assert_eq!(p.label(i), -t.label(i));
            } else {
                assert_eq!(p.label(i), t.label(i));
            }
        }
        assert_eq!(pop.purify(&p), p);
        // Clean sets purify to themselves.
        let clean_pop = Population::new(PopulationKind::HalfPlane2d, 0.0).unwrap();
        let (clean, _) = clean_pop.sample(50, 1);
        assert_eq!(clean_pop.purify(&clean), clean);
    }

    #[test]
    fn csv_round_trip() {
        let pop = Population::new(PopulationKind::Parity6d, 0.1).unwrap();
        let (t, noise) = pop.sample(40, 5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &noise).unwrap();
        let (t2, noise2) = TrainingSet::read_csv(&buf[..]).unwrap();
        assert_eq!(t, t2);
        assert_eq!(noise, noise2);
    }
}
