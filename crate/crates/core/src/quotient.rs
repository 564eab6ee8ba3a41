//! Partitions, quotient pseudometrics, and contraction of regions into tokens.
//!
//! The quotient distance between two classes is the length of the shortest
//! chain of parent-distance hops where moves inside a class are free. Classes
//! that end at distance zero are merged so the result is again a metric space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Metric};

/// Equivalence classes over points `0..n`. Classes are indexed in order of
/// their smallest member and each class lists its members ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl Partition {
    /// Canonicalizes arbitrary labels (one per point) into a partition.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let class_of = labels
            .iter()
            .enumerate()
            .map(|(p, l)| {
                let c = *remap.entry(*l).or_insert_with(|| {
                    classes.push(Vec::new());
                    classes.len() - 1
                });
                classes[c].push(p);
                c
            })
            .collect();
        Self { class_of, classes }
    }

    /// Builds a partition of `0..n` from explicit classes, checking that they
    /// are nonempty, disjoint and exhaustive.
    pub fn from_classes(n: usize, classes: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (c, members) in classes.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::PartitionMismatch(format!("class {c} is empty")));
            }
            for &p in members {
                if p >= n {
                    return Err(Error::UnknownPoint(p));
                }
                if labels[p] != usize::MAX {
                    return Err(Error::PartitionMismatch(format!(
                        "point {p} is in two classes"
                    )));
                }
                labels[p] = c;
            }
        }
        if let Some(p) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::PartitionMismatch(format!(
                "point {p} is in no class"
            )));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn whole(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    /// One class for `region`, singletons elsewhere.
    pub fn with_region(n: usize, region: &[usize]) -> Result<Self> {
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut labels: Vec<usize> = (0..n).collect();
        let anchor = region[0];
        for &p in region {
            if p >= n {
                return Err(Error::UnknownPoint(p));
            }
            labels[p] = anchor;
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn n_points(&self) -> usize {
        self.class_of.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, p: usize) -> usize {
        self.class_of[p]
    }

    pub fn labels(&self) -> &[usize] {
        &self.class_of
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.classes[c]
    }

    /// Finest partition coarser than both.
    pub fn join(&self, other: &Partition) -> Result<Partition> {
        if self.n_points() != other.n_points() {
            return Err(Error::PartitionMismatch(
                "partitions over different point sets".into(),
            ));
        }
        let mut uf = UnionFind::new(self.n_points());
        for part in [self, other] {
            for members in &part.classes {
                for w in members.windows(2) {
                    uf.union(w[0], w[1]);
                }
            }
        }
        Ok(Partition::from_labels(&uf.labels()))
    }

    /// Pulls a partition of this partition's classes back to the points:
    /// points are equivalent when their classes are.
    pub fn compose(&self, over_classes: &Partition) -> Result<Partition> {
        if over_classes.n_points() != self.n_classes() {
            return Err(Error::PartitionMismatch(format!(
                "second partition covers {} points, first has {} classes",
                over_classes.n_points(),
                self.n_classes()
            )));
        }
        let labels: Vec<usize> = self
            .class_of
            .iter()
            .map(|&c| over_classes.class_of(c))
            .collect();
        Ok(Partition::from_labels(&labels))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
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

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    fn labels(&mut self) -> Vec<usize> {
        (0..self.parent.len()).map(|i| self.find(i)).collect()
    }
}

/// A quotient level: the metric space over classes and the partition of the
/// parent points that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientSpace {
    pub space: FiniteMetricSpace,
    pub partition: Partition,
    pub level: usize,
}

/// Token id for class `class` at `level`.
pub fn token_id(level: usize, class: usize) -> String {
    format!("L{level}_C{class}")
}

/// The point that a contracted region becomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub id: String,
    pub class_id: usize,
    pub level: usize,
    pub members: Vec<usize>,
    /// Inclusive intervals of original stream indices, ascending and disjoint.
    pub provenance: Vec<(usize, usize)>,
}

pub const TOKEN_CSV_HEADER: &str = "token_id,level,member_count,provenance_start,provenance_end";

impl Token {
    /// One row per provenance interval.
    pub fn csv_rows(&self) -> Vec<String> {
        self.provenance
            .iter()
            .map(|(s, e)| {
                format!(
                    "{},{},{},{},{}",
                    self.id,
                    self.level,
                    self.members.len(),
                    s,
                    e
                )
            })
            .collect()
    }
}

/// Merges inclusive intervals into a sorted disjoint list.
pub fn merge_intervals(mut spans: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    spans.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 + 1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Class-to-class shortest-path distances with free intra-class moves.
fn class_distances<M: Metric>(space: &M, partition: &Partition) -> Vec<f64> {
    let c = partition.n_classes();
    let mut d = vec![f64::INFINITY; c * c];
    for i in 0..c {
        d[i * c + i] = 0.0;
    }
    let n = space.len();
    let labels = partition.labels();
    for x in 0..n {
        let cx = labels[x];
        for (y, &cy) in labels.iter().enumerate().skip(x + 1) {
            if cx == cy {
                continue;
            }
            let w = space.dist(x, y);
            let slot = &mut d[cx * c + cy];
            if w < *slot {
                *slot = w;
                d[cy * c + cx] = w;
            }
        }
    }
    // Floyd-Warshall over the complete class graph.
    let mut row_k = vec![0.0; c];
    for k in 0..c {
        row_k.copy_from_slice(&d[k * c..(k + 1) * c]);
        for i in 0..c {
            let dik = d[i * c + k];
            if !dik.is_finite() {
                continue;
            }
            let row_i = &mut d[i * c..(i + 1) * c];
            for (dij, &dkj) in row_i.iter_mut().zip(&row_k) {
                let via = dik + dkj;
                if via < *dij {
                    *dij = via;
                }
            }
        }
    }
    d
}

/// Quotient of `space` by `partition`, tagged with `level` for token ids.
pub fn build_quotient_at<M: Metric>(
    space: &M,
    partition: &Partition,
    level: usize,
) -> Result<QuotientSpace> {
    if partition.n_points() != space.len() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} points, space has {}",
            partition.n_points(),
            space.len()
        )));
    }
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let c = partition.n_classes();
    let d = class_distances(space, partition);

    // Merge classes at distance exactly zero.
    let mut uf = UnionFind::new(c);
    for i in 0..c {
        for j in (i + 1)..c {
            if d[i * c + j] == 0.0 {
                uf.union(i, j);
            }
        }
    }
    let merged = Partition::from_labels(&uf.labels());
    let (final_partition, reps, dist) = if merged.n_classes() == c {
        (partition.clone(), (0..c).collect::<Vec<_>>(), d)
    } else {
        let reps: Vec<usize> = merged.classes().iter().map(|m| m[0]).collect();
        let m = reps.len();
        let mut dist = vec![0.0; m * m];
        for (a, &ra) in reps.iter().enumerate() {
            for (b, &rb) in reps.iter().enumerate() {
                dist[a * m + b] = if a == b { 0.0 } else { d[ra * c + rb] };
            }
        }
        (partition.compose(&merged)?, reps, dist)
    };
    let ids = (0..reps.len()).map(|k| token_id(level, k)).collect();
    let space = FiniteMetricSpace::with_ids(ids, dist)?;
    Ok(QuotientSpace {
        space,
        partition: final_partition,
        level,
    })
}

/// Quotient of `space` by `partition` at level 1.
pub fn build_quotient<M: Metric>(space: &M, partition: &Partition) -> Result<QuotientSpace> {
    build_quotient_at(space, partition, 1)
}

/// Contracts `region` to a single token; all other points stay singletons.
pub fn contract_region<M: Metric>(
    space: &M,
    region: &[usize],
    provenance: &[(usize, usize)],
    level: usize,
) -> Result<(QuotientSpace, Token)> {
    let partition = Partition::with_region(space.len(), region)?;
    let q = build_quotient_at(space, &partition, level)?;
    let class_id = q.partition.class_of(region[0]);
    let token = Token {
        id: token_id(level, class_id),
        class_id,
        level,
        members: q.partition.members(class_id).to_vec(),
        provenance: merge_intervals(provenance.to_vec()),
    };
    Ok((q, token))
}

/// Independent quotient distance between points `a` and `b`: relaxes chains
/// point by point, alternating free moves inside a class with parent hops,
/// for up to `n` rounds.
pub fn quotient_distance_oracle<M: Metric>(
    space: &M,
    partition: &Partition,
    a: usize,
    b: usize,
) -> Result<f64> {
    let n = space.len();
    if partition.n_points() != n {
        return Err(Error::PartitionMismatch(
            "partition/space size differ".into(),
        ));
    }
    for p in [a, b] {
        if p >= n {
            return Err(Error::UnknownPoint(p));
        }
    }
    let mut best = vec![f64::INFINITY; n];
    for &m in partition.members(partition.class_of(a)) {
        best[m] = 0.0;
    }
    for _ in 0..n {
        let mut changed = false;
        for x in 0..n {
            if !best[x].is_finite() {
                continue;
            }
            for y in 0..n {
                let via = best[x] + space.dist(x, y);
                if via < best[y] {
                    best[y] = via;
                    changed = true;
                }
            }
        }
        for members in partition.classes() {
            let low = members
                .iter()
                .map(|&m| best[m])
                .fold(f64::INFINITY, f64::min);
            for &m in members {
                if low < best[m] {
                    best[m] = low;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(partition
        .members(partition.class_of(b))
        .iter()
        .map(|&m| best[m])
        .fold(f64::INFINITY, f64::min))
}
