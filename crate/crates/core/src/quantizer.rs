//! k-means codebook over standardized block descriptors, and the mapping of
//! an image's nine descriptors to a discrete label vector.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BlockFeatureVector, BLOCK_COUNT, DESCRIPTOR_LEN};

pub type Point = [f64; DESCRIPTOR_LEN];

const CODEBOOK_MAGIC: &str = "facebn-codebook v1";

#[derive(Debug, Error, PartialEq)]
pub enum QuantizerError {
    #[error("k-means needs {needed} distinct points, found {found}")]
    Data { needed: usize, found: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("expected {BLOCK_COUNT} descriptors, got {0}")]
    Length(usize),
    #[error("non-finite descriptor value")]
    NonFinite,
    #[error("codebook file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 8,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// Per-feature z-score parameters. A zero-variance feature keeps a unit
/// scale and is flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Point,
    pub std: Point,
    pub degenerate: [bool; DESCRIPTOR_LEN],
}

impl Standardization {
    pub fn fit(points: &[Point]) -> Self {
        let n = points.len().max(1) as f64;
        let mut mean = [0.0; DESCRIPTOR_LEN];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; DESCRIPTOR_LEN];
        for p in points {
            for d in 0..DESCRIPTOR_LEN {
                let dv = p[d] - mean[d];
                std[d] += dv * dv;
            }
        }
        let mut degenerate = [false; DESCRIPTOR_LEN];
        for d in 0..DESCRIPTOR_LEN {
            std[d] = (std[d] / n).sqrt();
            if std[d] <= 0.0 || !std[d].is_finite() {
                std[d] = 1.0;
                degenerate[d] = true;
            }
        }
        Self {
            mean,
            std,
            degenerate,
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        std::array::from_fn(|d| (p[d] - self.mean[d]) / self.std[d])
    }
}

/// Fitted centroids in standardized space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub standardization: Standardization,
    pub centroids: Vec<Point>,
}

/// A codebook plus diagnostics of the Lloyd run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Inertia after each assignment step, in order.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeansFit {
    pub fn final_inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

fn sq_dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest index.
fn nearest(centroids: &[Point], p: &Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Standardizes the descriptors, seeds with k-means++ and runs Lloyd
/// iterations until every centroid moves less than `tol` or `max_iter` is
/// reached. An empty cluster takes over the point farthest from its current
/// centroid (drawn from a cluster with at least two members), which keeps
/// the inertia sequence non-increasing.
pub fn kmeans_fit(points: &[Point], params: &KMeansParams) -> Result<KMeansFit, QuantizerError> {
    let k = params.k;
    if k == 0 {
        return Err(QuantizerError::ZeroK);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QuantizerError::NonFinite);
    }
    let standardization = Standardization::fit(points);
    let data: Vec<Point> = points.iter().map(|p| standardization.apply(p)).collect();
    let distinct = count_distinct(&data, k);
    if distinct < k {
        return Err(QuantizerError::Data {
            needed: k,
            found: distinct,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = plus_plus_init(&data, k, &mut rng);
    let mut assignment = vec![0usize; data.len()];
    let mut inertia_history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    loop {
        let mut inertia = 0.0;
        let mut costs = vec![0.0; data.len()];
        for (i, p) in data.iter().enumerate() {
            let (j, d) = nearest(&centroids, p);
            assignment[i] = j;
            costs[i] = d;
            inertia += d;
        }
        inertia_history.push(inertia);
        if converged || iterations >= params.max_iter {
            break;
        }
        iterations += 1;

        reseed_empty(&mut assignment, &costs, k);
        let mut sums = vec![[0.0; DESCRIPTOR_LEN]; k];
        let mut sizes = vec![0usize; k];
        for (p, &j) in data.iter().zip(&assignment) {
            sizes[j] += 1;
            for d in 0..DESCRIPTOR_LEN {
                sums[j][d] += p[d];
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let n = sizes[j] as f64;
            let next: Point = std::array::from_fn(|d| sums[j][d] / n);
            shift = shift.max(sq_dist(&next, &centroids[j]).sqrt());
            centroids[j] = next;
        }
        converged = shift < params.tol;
    }

    Ok(KMeansFit {
        codebook: Codebook {
            standardization,
            centroids,
        },
        inertia_history,
        iterations,
        converged,
    })
}

fn count_distinct(data: &[Point], cap: usize) -> usize {
    let mut seen: Vec<&Point> = Vec::new();
    for p in data {
        if !seen.iter().any(|q| *q == p) {
            seen.push(p);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

fn plus_plus_init(data: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut centroids = vec![data[rng.gen_range(0..data.len())]];
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        // at least k distinct points exist, so some weight is positive
        let dist = WeightedIndex::new(&d2).expect("positive total weight");
        let next = data[dist.sample(rng)];
        for (w, p) in d2.iter_mut().zip(data) {
            *w = w.min(sq_dist(p, &next));
        }
        centroids.push(next);
    }
    centroids
}

fn reseed_empty(assignment: &mut [usize], costs: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &j in assignment.iter() {
        sizes[j] += 1;
    }
    let mut taken = vec![false; assignment.len()];
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = (0..assignment.len())
            .filter(|&i| !taken[i] && sizes[assignment[i]] > 1)
            .max_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(b.cmp(&a)));
        if let Some(i) = donor {
            sizes[assignment[i]] -= 1;
            assignment[i] = empty;
            sizes[empty] = 1;
            taken[i] = true;
        }
    }
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Label of a raw (unstandardized) descriptor.
    pub fn assign(&self, d: &Point) -> usize {
        self.assign_standardized(&self.standardization.apply(d))
    }

    pub fn assign_standardized(&self, z: &Point) -> usize {
        nearest(&self.centroids, z).0
    }

    pub fn labelize(&self, descriptors: &[BlockFeatureVector]) -> Result<LabelVector, QuantizerError> {
        if descriptors.len() != BLOCK_COUNT {
            return Err(QuantizerError::Length(descriptors.len()));
        }
        let labels = std::array::from_fn(|b| self.assign(&descriptors[b].to_array()) as u16);
        Ok(LabelVector(labels))
    }

    /// Versioned plain-text form: magic line, `k`, the standardization
    /// rows, then one centroid per line. Floats are written in shortest
    /// round-trip form.
    pub fn to_text(&self) -> String {
        let row = |p: &Point| {
            p.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        let _ = writeln!(out, "{CODEBOOK_MAGIC}");
        let _ = writeln!(out, "k {}", self.k());
        let _ = writeln!(out, "dim {DESCRIPTOR_LEN}");
        let _ = writeln!(out, "mean {}", row(&self.standardization.mean));
        let _ = writeln!(out, "std {}", row(&self.standardization.std));
        let flags: Vec<&str> = self
            .standardization
            .degenerate
            .iter()
            .map(|&d| if d { "1" } else { "0" })
            .collect();
        let _ = writeln!(out, "degenerate {}", flags.join(" "));
        for c in &self.centroids {
            let _ = writeln!(out, "centroid {}", row(c));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, QuantizerError> {
        let err = |m: &str| QuantizerError::Parse(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some(CODEBOOK_MAGIC) {
            return Err(err("missing or unsupported version header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>, QuantizerError> {
            let line = lines.next().ok_or_else(|| err("unexpected end of file"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(QuantizerError::Parse(format!("expected `{name}` line, got {line:?}")));
            }
            Ok(parts.map(String::from).collect())
        };
        let point = |vals: Vec<String>| -> Result<Point, QuantizerError> {
            if vals.len() != DESCRIPTOR_LEN {
                return Err(err("wrong number of columns"));
            }
            let mut p = [0.0; DESCRIPTOR_LEN];
            for (slot, v) in p.iter_mut().zip(vals) {
                *slot = v.parse().map_err(|_| err("bad number"))?;
            }
            Ok(p)
        };
        let k: usize = field("k")?
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err("bad k"))?;
        let dim: usize = field("dim")?
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err("bad dim"))?;
        if dim != DESCRIPTOR_LEN || k == 0 {
            return Err(err("unsupported shape"));
        }
        let mean = point(field("mean")?)?;
        let std = point(field("std")?)?;
        let flags = field("degenerate")?;
        if flags.len() != DESCRIPTOR_LEN {
            return Err(err("wrong number of degenerate flags"));
        }
        let degenerate = std::array::from_fn(|d| flags[d] == "1");
        let centroids = (0..k)
            .map(|_| point(field("centroid")?))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Codebook {
            standardization: Standardization {
                mean,
                std,
                degenerate,
            },
            centroids,
        })
    }
}

/// Nine cluster labels, one per grid block in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector(pub [u16; BLOCK_COUNT]);

impl LabelVector {
    pub fn as_usizes(&self) -> Vec<usize> {
        self.0.iter().map(|&l| usize::from(l)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_axis(values: &[f64]) -> Vec<Point> {
        values
            .iter()
            .map(|&v| {
                let mut p = [0.0; DESCRIPTOR_LEN];
                p[0] = v;
                p
            })
            .collect()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = on_axis(&[1.0, 2.0, 6.0]);
        let fit = kmeans_fit(&pts, &KMeansParams { k: 1, ..Default::default() }).unwrap();
        let c = fit.codebook.centroids[0];
        assert!(c.iter().all(|v| v.abs() < 1e-12), "standardized mean is 0");
        assert!(pts.iter().all(|p| fit.codebook.assign(p) == 0));
        assert!(fit.codebook.standardization.degenerate[1]);
        assert!(!fit.codebook.standardization.degenerate[0]);
    }

    #[test]
    fn k_equal_to_distinct_points() {
        let pts = on_axis(&[0.0, 3.0, 7.0, 7.0, 20.0]);
        let fit = kmeans_fit(&pts, &KMeansParams { k: 4, ..Default::default() }).unwrap();
        assert_eq!(fit.final_inertia(), 0.0);
        let labels: Vec<_> = pts.iter().map(|p| fit.codebook.assign(p)).collect();
        assert_eq!(labels[2], labels[3]);
        let mut uniq = labels.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 4);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = on_axis(&[1.0, 1.0, 1.0]);
        assert_eq!(
            kmeans_fit(&pts, &KMeansParams { k: 2, ..Default::default() }),
            Err(QuantizerError::Data { needed: 2, found: 1 })
        );
        assert_eq!(
            kmeans_fit(&pts, &KMeansParams { k: 0, ..Default::default() }),
            Err(QuantizerError::ZeroK)
        );
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let cb = Codebook {
            standardization: Standardization::fit(&on_axis(&[-1.0, 1.0])),
            centroids: vec![[9.0; 6], [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0], [9.0; 6], [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]],
        };
        assert_eq!(cb.assign_standardized(&[0.0; 6]), 1);
        assert_eq!(cb.assign_standardized(&cb.centroids[3]), 3);
    }

    #[test]
    fn labelize_length() {
        let fit = kmeans_fit(&on_axis(&[0.0, 5.0]), &KMeansParams { k: 2, ..Default::default() }).unwrap();
        let d = BlockFeatureVector::from_array([5.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(fit.codebook.labelize(&[d; 8]), Err(QuantizerError::Length(8)));
        let lv = fit.codebook.labelize(&[d; 9]).unwrap();
        assert!(lv.0.iter().all(|&l| l == lv.0[0]));
    }

    #[test]
    fn text_round_trip() {
        let pts: Vec<Point> = (0..40)
            .map(|i| {
                let t = i as f64;
                [t.sin() * 3.0, t.cos(), 0.1 * t, 2.0, (t * 0.37).fract(), t * t * 1e-3]
            })
            .collect();
        let fit = kmeans_fit(&pts, &KMeansParams { k: 5, seed: 11, ..Default::default() }).unwrap();
        let text = fit.codebook.to_text();
        assert_eq!(Codebook::from_text(&text).unwrap(), fit.codebook);
        assert!(Codebook::from_text("facebn-codebook v0\n").is_err());
    }
}
