use super::{AttributeSpace, BayesError, Instance};

/// Exact sufficient statistics `N`, `N(c)`, `N(c, a_i)` and
/// `N(c, a_i, a_j)` of a labeled data set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    space: AttributeSpace,
    total: u64,
    class: Vec<u64>,
    /// `[i][c * v_i + a]`
    single: Vec<Vec<u64>>,
    /// `[pair_slot(i, j)][(c * v_i + a) * v_j + b]` for `i < j`
    pair: Vec<Vec<u64>>,
}

/// Counts of one variable under each parent configuration, row-major
/// `[config][value]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub configs: usize,
    pub values: usize,
    pub counts: Vec<u64>,
}

impl CountTable {
    pub fn new(configs: usize, values: usize, counts: Vec<u64>) -> Result<Self, BayesError> {
        if counts.len() != configs * values || values == 0 {
            return Err(BayesError::Shape(format!(
                "{} counts for {configs}x{values} table",
                counts.len()
            )));
        }
        Ok(Self {
            configs,
            values,
            counts,
        })
    }

    /// A single parent configuration.
    pub fn row(counts: &[u64]) -> Self {
        Self {
            configs: 1,
            values: counts.len(),
            counts: counts.to_vec(),
        }
    }

    pub fn config(&self, j: usize) -> &[u64] {
        &self.counts[j * self.values..(j + 1) * self.values]
    }
}

fn pair_slot(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub fn count_tables(data: &[Instance], space: &AttributeSpace) -> Result<Counts, BayesError> {
    let mut counts = Counts::zeros(space.clone());
    for inst in data {
        counts.add(inst)?;
    }
    Ok(counts)
}

impl Counts {
    pub fn zeros(space: AttributeSpace) -> Self {
        let n = space.n();
        let c = space.class_count();
        let single = (0..n).map(|i| vec![0; c * space.cardinality(i)]).collect();
        let mut pair = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pair.push(vec![0; c * space.cardinality(i) * space.cardinality(j)]);
            }
        }
        Self {
            class: vec![0; c],
            total: 0,
            single,
            pair,
            space,
        }
    }

    pub fn add(&mut self, inst: &Instance) -> Result<(), BayesError> {
        self.space.check(&inst.attrs)?;
        self.space.check_class(inst.class)?;
        let c = inst.class;
        let n = self.space.n();
        self.total += 1;
        self.class[c] += 1;
        for (i, &a) in inst.attrs.iter().enumerate() {
            let vi = self.space.cardinality(i);
            self.single[i][c * vi + a] += 1;
            for (j, &b) in inst.attrs.iter().enumerate().skip(i + 1) {
                let vj = self.space.cardinality(j);
                self.pair[pair_slot(n, i, j)][(c * vi + a) * vj + b] += 1;
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &AttributeSpace {
        &self.space
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn class(&self, c: usize) -> u64 {
        self.class[c]
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class
    }

    /// `N(c, A_i = a)`
    pub fn single(&self, c: usize, i: usize, a: usize) -> u64 {
        self.single[i][c * self.space.cardinality(i) + a]
    }

    /// `N(c, A_i = a, A_j = b)`, `i != j` in either order.
    pub fn pair(&self, c: usize, i: usize, a: usize, j: usize, b: usize) -> u64 {
        assert_ne!(i, j, "pair counts need two distinct attributes");
        let n = self.space.n();
        if i < j {
            let vi = self.space.cardinality(i);
            let vj = self.space.cardinality(j);
            self.pair[pair_slot(n, i, j)][(c * vi + a) * vj + b]
        } else {
            self.pair(c, j, b, i, a)
        }
    }

    /// Counts of `A_i` per parent configuration: the class alone
    /// (`config = c`) or the class and `A_parent` (`config = c * v_p + b`).
    pub fn family_table(&self, i: usize, parent: Option<usize>) -> CountTable {
        let vi = self.space.cardinality(i);
        let classes = self.space.class_count();
        match parent {
            None => CountTable {
                configs: classes,
                values: vi,
                counts: self.single[i].clone(),
            },
            Some(p) => {
                let vp = self.space.cardinality(p);
                let mut counts = Vec::with_capacity(classes * vp * vi);
                for c in 0..classes {
                    for b in 0..vp {
                        for a in 0..vi {
                            counts.push(self.pair(c, i, a, p, b));
                        }
                    }
                }
                CountTable {
                    configs: classes * vp,
                    values: vi,
                    counts,
                }
            }
        }
    }

    /// Like [`Counts::family_table`] restricted to class `c`: configurations
    /// range over the parent's values only (one configuration without a
    /// parent).
    pub fn family_table_for_class(&self, c: usize, i: usize, parent: Option<usize>) -> CountTable {
        let full = self.family_table(i, parent);
        let per_class = full.configs / self.space.class_count();
        let start = c * per_class * full.values;
        CountTable {
            configs: per_class,
            values: full.values,
            counts: full.counts[start..start + per_class * full.values].to_vec(),
        }
    }
}
