//! Augmenting structures over the attributes: naive (no arcs), a maximum
//! weight spanning tree (TAN) and a thresholded forest (FAN). The class node
//! is an implicit parent of every attribute and never stored.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::info::CmiMatrix;
use super::BayesError;

/// At most one attribute parent per attribute; the parent graph is a forest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Structure {
    parents: Vec<Option<usize>>,
}

impl Structure {
    pub fn naive(n: usize) -> Self {
        Self {
            parents: vec![None; n],
        }
    }

    pub fn from_parents(parents: Vec<Option<usize>>) -> Result<Self, BayesError> {
        let n = parents.len();
        for (i, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(BayesError::Structure(format!(
                        "parent {p} of attribute {i} does not exist"
                    )));
                }
            }
        }
        // walk up from every node; a path longer than n revisits a node
        for start in 0..n {
            let mut node = start;
            for _ in 0..n {
                match parents[node] {
                    Some(p) if p == start => {
                        return Err(BayesError::Structure(format!(
                            "attribute {start} is its own ancestor"
                        )))
                    }
                    Some(p) => node = p,
                    None => break,
                }
            }
        }
        Ok(Self { parents })
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents[i]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().flatten().count()
    }

    /// Undirected attribute edges as sorted `(min, max)` pairs.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i.min(p), i.max(p))))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// One `attr -> parent` line per attribute, 1-based `F<i>` names;
    /// attributes whose only parent is the class read `F<i> -> class`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.parents.iter().enumerate() {
            match p {
                Some(p) => out.push_str(&format!("F{} -> F{}\n", i + 1, p + 1)),
                None => out.push_str(&format!("F{} -> class\n", i + 1)),
            }
        }
        out
    }
}

/// Edge-pruning threshold for forest structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    /// Mean pairwise conditional mutual information.
    Average,
    Fixed(f64),
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMode::Average => f.write_str("avg"),
            ThresholdMode::Fixed(s) => write!(f, "{s:?}"),
        }
    }
}

impl FromStr for ThresholdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "avg" | "average" => Ok(ThresholdMode::Average),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .map(ThresholdMode::Fixed)
                .ok_or_else(|| format!("threshold must be `avg` or a number, got {other:?}")),
        }
    }
}

/// `sum_{i != j} cmi(i, j) / (n (n - 1))`, zero for fewer than two
/// attributes.
pub fn average_cmi(cmi: &CmiMatrix) -> f64 {
    let n = cmi.n();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += cmi.get(i, j);
        }
    }
    2.0 * sum / (n * (n - 1)) as f64
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Kruskal maximum-weight spanning tree. Heavier edges first; equal weights
/// in lexicographic `(i, j)` order.
fn max_spanning_tree(cmi: &CmiMatrix) -> Vec<(usize, usize)> {
    let n = cmi.n();
    let mut edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    edges.sort_by(|&(a, b), &(c, d)| {
        cmi.get(c, d)
            .total_cmp(&cmi.get(a, b))
            .then((a, b).cmp(&(c, d)))
    });
    let mut sets = DisjointSet::new(n);
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (i, j) in edges {
        if sets.union(i, j) {
            tree.push((i, j));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// Directs an undirected forest away from one root per component: the
/// member with the highest score, lowest index on ties.
fn orient(n: usize, edges: &[(usize, usize)], root_scores: &[f64]) -> Structure {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut component = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut stack = vec![start];
        let mut list = Vec::new();
        component[start] = id;
        while let Some(v) = stack.pop() {
            list.push(v);
            for &w in &adj[v] {
                if component[w] == usize::MAX {
                    component[w] = id;
                    stack.push(w);
                }
            }
        }
        list.sort_unstable();
        members.push(list);
    }

    let mut parents = vec![None; n];
    for list in &members {
        let mut root = list[0];
        for &v in &list[1..] {
            if root_scores[v] > root_scores[root] {
                root = v;
            }
        }
        let mut queue = std::collections::VecDeque::from([root]);
        let mut seen = vec![false; n];
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_unstable();
            for w in next {
                seen[w] = true;
                parents[w] = Some(v);
                queue.push_back(w);
            }
        }
    }
    Structure { parents }
}

fn check_scores(cmi: &CmiMatrix, root_scores: &[f64]) {
    assert_eq!(
        root_scores.len(),
        cmi.n(),
        "one root score per attribute required"
    );
}

/// Tree-augmented structure: the maximum-weight spanning tree of the
/// conditional mutual information, rooted at the attribute most
/// informative about the class.
pub fn chow_liu_tan(cmi: &CmiMatrix, root_scores: &[f64]) -> Structure {
    check_scores(cmi, root_scores);
    orient(cmi.n(), &max_spanning_tree(cmi), root_scores)
}

/// Forest-augmented structure: the TAN tree minus every edge whose weight
/// is strictly below the threshold. Each remaining component is rooted at
/// its most class-informative member.
pub fn fan_structure(cmi: &CmiMatrix, root_scores: &[f64], mode: ThresholdMode) -> Structure {
    check_scores(cmi, root_scores);
    let threshold = match mode {
        ThresholdMode::Average => average_cmi(cmi),
        ThresholdMode::Fixed(s) => s,
    };
    let kept: Vec<_> = max_spanning_tree(cmi)
        .into_iter()
        .filter(|&(i, j)| cmi.get(i, j) >= threshold)
        .collect();
    orient(cmi.n(), &kept, root_scores)
}
