//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code it checks.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use facebn::bayesnet::{BnModel, Instance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn synthetic_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic5")
}

/// Random symmetric `n×n` weight matrix, zero diagonal, entries in [0, 1).
pub fn random_weights(n: usize, r: &mut impl Rng) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = r.gen();
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    w
}

/// Edges of the labeled tree encoded by a Prüfer sequence.
pub fn prufer_tree(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

/// Every maximum-weight spanning tree on `n ≥ 2` nodes, found by
/// enumerating all `n^(n-2)` labeled trees. Weights within `1e-12` of the
/// best count as optimal.
pub fn brute_max_spanning_trees(n: usize, w: &[f64]) -> (f64, BTreeSet<Vec<(usize, usize)>>) {
    let mut best = f64::NEG_INFINITY;
    let mut trees = BTreeSet::new();
    let len = n.saturating_sub(2);
    let total = n.pow(len as u32);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len {
            seq.push(c % n);
            c /= n;
        }
        let edges = prufer_tree(&seq, n);
        let weight: f64 = edges.iter().map(|&(i, j)| w[i * n + j]).sum();
        if weight > best + 1e-12 {
            best = weight;
            trees.clear();
            trees.insert(edges);
        } else if (weight - best).abs() <= 1e-12 {
            trees.insert(edges);
        }
    }
    (best, trees)
}

fn is_acyclic(n: usize, adj: &[bool]) -> bool {
    let mut indeg = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if adj[i * n + j] {
                indeg[j] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for j in 0..n {
            if adj[v * n + j] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    stack.push(j);
                }
            }
        }
    }
    seen == n
}

/// Labeled DAGs on `n` nodes by testing every directed graph without
/// self-loops for acyclicity.
pub fn enumerate_dags(n: usize) -> u64 {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut count = 0;
    for mask in 0u64..(1 << pairs.len()) {
        let mut adj = vec![false; n * n];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                adj[i * n + j] = true;
            }
        }
        if is_acyclic(n, &adj) {
            count += 1;
        }
    }
    count
}

/// `P(c) * prod_i P(a_i | parents)` normalized, in plain floating point.
pub fn direct_posterior(model: &BnModel, attrs: &[usize]) -> Vec<f64> {
    let classes = model.space().class_count();
    let joint: Vec<f64> = (0..classes)
        .map(|c| {
            let mut p = model.class_prior()[c];
            for i in 0..attrs.len() {
                p *= model.cond(i, c, attrs);
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|p| p / z).collect()
}

/// Uniformly random instances.
pub fn random_instances(
    count: usize,
    n: usize,
    k: usize,
    classes: usize,
    r: &mut impl Rng,
) -> Vec<Instance> {
    (0..count)
        .map(|_| Instance::new((0..n).map(|_| r.gen_range(0..k)).collect(), r.gen_range(0..classes)))
        .collect()
}

/// All `k^n` attribute vectors in lexicographic order.
pub fn all_vectors(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k.pow(n as u32));
    for code in 0..k.pow(n as u32) {
        let mut v = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            v.push(c % k);
            c /= k;
        }
        v.reverse();
        out.push(v);
    }
    out
}

/// A generative TAN over `k`-valued attributes: the root depends on the
/// class only, every other attribute copies its tree parent with
/// probability `copy` and otherwise takes one of the remaining values
/// uniformly.
pub struct TanGenerator {
    pub k: usize,
    pub classes: usize,
    pub parents: Vec<Option<usize>>,
    pub root_given_class: Vec<Vec<f64>>,
    pub copy: f64,
}

impl TanGenerator {
    fn child_prob(&self, parent_value: usize, value: usize) -> f64 {
        if value == parent_value {
            self.copy
        } else {
            (1.0 - self.copy) / (self.k - 1) as f64
        }
    }

    /// Parents listed before children.
    fn order(&self) -> Vec<usize> {
        let n = self.parents.len();
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            for i in 0..n {
                if order.contains(&i) {
                    continue;
                }
                if self.parents[i].map_or(true, |p| order.contains(&p)) {
                    order.push(i);
                }
            }
        }
        order
    }

    pub fn joint(&self, c: usize, a: &[usize]) -> f64 {
        let mut p = 1.0 / self.classes as f64;
        for (i, parent) in self.parents.iter().enumerate() {
            p *= match parent {
                None => self.root_given_class[c][a[i]],
                Some(q) => self.child_prob(a[*q], a[i]),
            };
        }
        p
    }

    pub fn sample(&self, count: usize, r: &mut impl Rng) -> Vec<Instance> {
        let order = self.order();
        let n = self.parents.len();
        (0..count)
            .map(|_| {
                let c = r.gen_range(0..self.classes);
                let mut a = vec![0; n];
                for &i in &order {
                    let probs: Vec<f64> = match self.parents[i] {
                        None => self.root_given_class[c].clone(),
                        Some(q) => (0..self.k).map(|v| self.child_prob(a[q], v)).collect(),
                    };
                    let u: f64 = r.gen();
                    let mut acc = 0.0;
                    a[i] = self.k - 1;
                    for (v, p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            a[i] = v;
                            break;
                        }
                    }
                }
                Instance::new(a, c)
            })
            .collect()
    }

    /// Exact `I(A_i; A_j | C)` in nats by summing the joint distribution.
    pub fn exact_cmi(&self, i: usize, j: usize) -> f64 {
        let n = self.parents.len();
        let k = self.k;
        let mut pc = vec![0.0; self.classes];
        let mut pci = vec![0.0; self.classes * k];
        let mut pcj = vec![0.0; self.classes * k];
        let mut pcij = vec![0.0; self.classes * k * k];
        for c in 0..self.classes {
            for a in all_vectors(n, k) {
                let p = self.joint(c, &a);
                pc[c] += p;
                pci[c * k + a[i]] += p;
                pcj[c * k + a[j]] += p;
                pcij[(c * k + a[i]) * k + a[j]] += p;
            }
        }
        let mut cmi = 0.0;
        for c in 0..self.classes {
            for x in 0..k {
                for y in 0..k {
                    let p = pcij[(c * k + x) * k + y];
                    if p > 0.0 {
                        cmi += p * (p * pc[c] / (pci[c * k + x] * pcj[c * k + y])).ln();
                    }
                }
            }
        }
        cmi
    }

    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i.min(p), i.max(p))))
            .collect();
        e.sort_unstable();
        e
    }
}

/// The five-attribute, three-valued, two-class generator used for
/// structure recovery: skeleton 0-1, 1-2, 1-3, 3-4.
pub fn reference_tan() -> TanGenerator {
    TanGenerator {
        k: 3,
        classes: 2,
        parents: vec![None, Some(0), Some(1), Some(1), Some(3)],
        root_given_class: vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.3, 0.6]],
        copy: 0.8,
    }
}

/// Smallest tree-edge CMI minus largest non-tree CMI.
pub fn cmi_margin(g: &TanGenerator) -> f64 {
    let n = g.parents.len();
    let tree = g.skeleton();
    let mut min_in = f64::INFINITY;
    let mut max_out: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v = g.exact_cmi(i, j);
            if tree.contains(&(i, j)) {
                min_in = min_in.min(v);
            } else {
                max_out = max_out.max(v);
            }
        }
    }
    min_in - max_out
}

/// Uniformly random pixel values.
pub fn random_pixels(len: usize, r: &mut impl Rng) -> Vec<u8> {
    (0..len).map(|_| r.gen()).collect()
}

/// Smooth random image: a few random low-frequency cosines.
pub fn smooth_pixels(w: usize, h: usize, r: &mut impl Rng) -> Vec<u8> {
    let terms: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| (r.gen_range(0.1..0.6), r.gen_range(0.1..0.6), r.gen_range(0.0..6.3), r.gen_range(20.0..50.0)))
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut v = 128.0;
            for &(fx, fy, ph, amp) in &terms {
                v += amp * (fx * x as f64 + fy * y as f64 + ph).cos();
            }
            out.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}
