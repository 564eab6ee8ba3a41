//! Urysohn-type separators, fiber quotients and the recursive separation check.

use crate::error::{Error, Result};
use crate::hierarchy::{push_level, Hierarchy, LevelSpace, Verdict};
use crate::metric::{FiniteMetricSpace, Metric};
use crate::quotient::{build_quotient_at, Partition, QuotientSpace};

/// A [0, 1]-valued function on a finite space, 0 exactly on `zero_set` and 1
/// exactly on `one_set`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separator {
    values: Vec<f64>,
    zero_set: Vec<usize>,
    one_set: Vec<usize>,
}

impl Separator {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn zero_set(&self) -> &[usize] {
        &self.zero_set
    }

    pub fn one_set(&self) -> &[usize] {
        &self.one_set
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

pub const SEPARATOR_CSV_HEADER: &str = "point_id,f_value,set";

/// Distance from `p` to the nearest member of `set`.
pub fn dist_to_set<M: Metric>(space: &M, p: usize, set: &[usize]) -> f64 {
    set.iter()
        .map(|&q| space.dist(p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest distance between a point of `a` and a point of `b`, with the witnessing pair.
pub fn set_gap<M: Metric>(space: &M, a: &[usize], b: &[usize]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for &p in a {
        for &q in b {
            let d = space.dist(p, q);
            if d < best.0 {
                best = (d, p, q);
            }
        }
    }
    best
}

fn normalize_set(n: usize, set: &[usize], name: &'static str) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(Error::EmptySet(name));
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&p) = s.iter().find(|&&p| p >= n) {
        return Err(Error::UnknownPoint(p));
    }
    Ok(s)
}

/// `f(x) = d(x, A) / (d(x, A) + d(x, B))`. Lipschitz with constant `1 / gap(A, B)`.
pub fn urysohn_separator<M: Metric>(space: &M, a: &[usize], b: &[usize]) -> Result<Separator> {
    let n = space.len();
    let a = normalize_set(n, a, "A")?;
    let b = normalize_set(n, b, "B")?;
    if let Some(&p) = a.iter().find(|p| b.binary_search(p).is_ok()) {
        return Err(Error::OverlappingSets(p));
    }
    let (gap, p, q) = set_gap(space, &a, &b);
    if gap <= 0.0 {
        return Err(Error::ZeroGap(p, q));
    }
    let values = (0..n)
        .map(|x| {
            let da = dist_to_set(space, x, &a);
            let db = dist_to_set(space, x, &b);
            da / (da + db)
        })
        .collect();
    Ok(Separator {
        values,
        zero_set: a,
        one_set: b,
    })
}

/// Threshold classifier at 1/2.
pub fn classify_threshold(f: &Separator, p: usize) -> Side {
    if f.value(p) > 0.5 {
        Side::B
    } else {
        Side::A
    }
}

/// Fraction of labelled points the threshold classifier gets right.
pub fn threshold_accuracy(f: &Separator, labels: &[Side]) -> f64 {
    let hits = labels
        .iter()
        .enumerate()
        .filter(|&(p, &s)| classify_threshold(f, p) == s)
        .count();
    hits as f64 / labels.len() as f64
}

/// Quantizer slot and representative value. Exact 0 and exact 1 keep their
/// own slots; everything else falls in one of `n_bins` uniform bins and is
/// represented by the bin midpoint.
pub fn quantize(v: f64, n_bins: usize) -> (usize, f64) {
    if v == 0.0 {
        return (0, 0.0);
    }
    if v == 1.0 {
        return (n_bins + 1, 1.0);
    }
    let b = ((v * n_bins as f64).floor() as usize).min(n_bins - 1);
    (b + 1, (b as f64 + 0.5) / n_bins as f64)
}

fn quantized(f: &Separator, n_bins: usize) -> Separator {
    Separator {
        values: f.values.iter().map(|&v| quantize(v, n_bins).1).collect(),
        zero_set: f.zero_set.clone(),
        one_set: f.one_set.clone(),
    }
}

/// The partition of a space into binned level sets of a separator.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberPartition {
    pub partition: Partition,
    pub n_bins: usize,
    /// `n_bins + 1` uniform edges over [0, 1].
    pub bin_edges: Vec<f64>,
    /// Quantizer slot of each class: 0 for f = 0, `n_bins + 1` for f = 1.
    pub slot_of_class: Vec<usize>,
}

fn image(partition: &Partition, set: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = set.iter().map(|&p| partition.class_of(p)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Descends `f` along `partition`: each class must carry a single value.
pub fn descend_separator(f: &Separator, partition: &Partition) -> Result<Separator> {
    if partition.n_points() != f.len() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} points, separator has {}",
            partition.n_points(),
            f.len()
        )));
    }
    let mut values = Vec::with_capacity(partition.n_classes());
    for (c, members) in partition.classes().iter().enumerate() {
        let v1 = f.value(members[0]);
        if let Some(&m) = members.iter().find(|&&m| f.value(m) != v1) {
            return Err(Error::IncompatiblePartition {
                level: 0,
                class: c,
                v1,
                v2: f.value(m),
            });
        }
        values.push(v1);
    }
    Ok(Separator {
        values,
        zero_set: image(partition, &f.zero_set),
        one_set: image(partition, &f.one_set),
    })
}

/// Quotient by the binned fibers of `f`, with the separator descended to it.
pub fn fiber_quotient<M: Metric>(
    space: &M,
    f: &Separator,
    n_bins: usize,
) -> Result<(QuotientSpace, FiberPartition, Separator)> {
    fiber_quotient_at(space, f, n_bins, 1)
}

pub fn fiber_quotient_at<M: Metric>(
    space: &M,
    f: &Separator,
    n_bins: usize,
    level: usize,
) -> Result<(QuotientSpace, FiberPartition, Separator)> {
    if n_bins < 2 {
        return Err(Error::InvalidBins(n_bins));
    }
    if f.len() != space.len() {
        return Err(Error::PartitionMismatch(
            "separator/space size differ".into(),
        ));
    }
    let slots: Vec<usize> = f.values.iter().map(|&v| quantize(v, n_bins).0).collect();
    let q = build_quotient_at(space, &Partition::from_labels(&slots), level)?;
    let fbar = descend_separator(&quantized(f, n_bins), &q.partition)
        .map_err(|e| at_level(e, level - 1))?;
    let fp = FiberPartition {
        n_bins,
        bin_edges: (0..=n_bins).map(|b| b as f64 / n_bins as f64).collect(),
        slot_of_class: q.partition.classes().iter().map(|m| slots[m[0]]).collect(),
        partition: q.partition.clone(),
    };
    Ok((q, fp, fbar))
}

fn at_level(e: Error, level: usize) -> Error {
    match e {
        Error::IncompatiblePartition { class, v1, v2, .. } => Error::IncompatiblePartition {
            level,
            class,
            v1,
            v2,
        },
        other => other,
    }
}

/// Builds a tower over `space` whose k-th map is the fiber partition of the
/// current separator at `bins[k]` bins.
pub fn build_fiber_tower(
    space: &FiniteMetricSpace,
    a: &[usize],
    b: &[usize],
    bins: &[usize],
    epsilon: f64,
) -> Result<Hierarchy> {
    let policy = crate::hierarchy::CondensationPolicy::fiber(2, f64::MAX);
    let mut h = crate::hierarchy::build_hierarchy_from(
        LevelSpace::Dense(space.clone()),
        &policy,
        epsilon,
        usize::MAX,
        0,
    )?;
    let mut f = urysohn_separator(space, a, b)?;
    for &n_bins in bins {
        let (_, fp, fbar) = fiber_quotient_at(h.top(), &f, n_bins, h.depth() + 1)?;
        push_level(&mut h, fp.partition, Some(n_bins))?;
        f = fbar;
    }
    h.verdict = Verdict::MaxDepth;
    Ok(h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationLevel {
    pub level: usize,
    pub n_points: usize,
    pub a_image: usize,
    pub b_image: usize,
    pub disjoint: bool,
    /// Largest separator value over the image of A (must be 0).
    pub f_a: f64,
    /// Smallest separator value over the image of B (must be 1).
    pub f_b: f64,
    pub pass: bool,
}

pub const SEPARATION_CSV_HEADER: &str =
    "level,n_points,A_image_size,B_image_size,disjoint,f_A,f_B,pass";

impl SeparationLevel {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.level,
            self.n_points,
            self.a_image,
            self.b_image,
            self.disjoint,
            self.f_a,
            self.f_b,
            self.pass
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub levels: Vec<SeparationLevel>,
    pub pass: bool,
}

fn level_row(level: usize, f: &Separator) -> SeparationLevel {
    let a = f.zero_set();
    let b = f.one_set();
    let disjoint = a.iter().all(|p| b.binary_search(p).is_err());
    let f_a = a.iter().map(|&p| f.value(p)).fold(0.0, f64::max);
    let f_b = b.iter().map(|&p| f.value(p)).fold(1.0, f64::min);
    SeparationLevel {
        level,
        n_points: f.len(),
        a_image: a.len(),
        b_image: b.len(),
        disjoint,
        f_a,
        f_b,
        pass: disjoint && f_a == 0.0 && f_b == 1.0,
    }
}

/// Re-runs the separation argument on every level of `tower`: builds the
/// separator on level 0 and descends it through each map (quantized where
/// the tower records a bin count). An incompatible map at level k fails
/// with `IncompatiblePartition { level: k, .. }`.
pub fn recursive_separation_check(
    tower: &Hierarchy,
    a0: &[usize],
    b0: &[usize],
) -> Result<SeparationReport> {
    let mut f = urysohn_separator(&tower.levels[0], a0, b0)?;
    let mut levels = vec![level_row(0, &f)];
    for (k, map) in tower.maps.iter().enumerate() {
        let g = match tower.fiber_bins.get(k).copied().flatten() {
            Some(n) => quantized(&f, n),
            None => f.clone(),
        };
        f = descend_separator(&g, map).map_err(|e| at_level(e, k))?;
        levels.push(level_row(k + 1, &f));
    }
    let pass = levels.iter().all(|l| l.pass);
    Ok(SeparationReport { levels, pass })
}

/// Best accuracy any line achieves on labelled planar points, searched over
/// `n_directions` random unit normals plus both axes with an exhaustive
/// threshold sweep per direction.
pub fn linear_baseline_accuracy(
    points: &[[f64; 2]],
    labels: &[Side],
    n_directions: usize,
    seed: u64,
) -> f64 {
    let mut rng = crate::rng::Rng::new(seed);
    let mut dirs = vec![[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n_directions {
        let t = std::f64::consts::TAU * rng.uniform();
        dirs.push([t.cos(), t.sin()]);
    }
    let n = points.len();
    let total_b = labels.iter().filter(|&&s| s == Side::B).count();
    let mut best = 0usize;
    let mut proj: Vec<(f64, Side)> = Vec::with_capacity(n);
    for w in dirs {
        proj.clear();
        proj.extend(
            points
                .iter()
                .zip(labels)
                .map(|(p, &s)| (w[0] * p[0] + w[1] * p[1], s)),
        );
        proj.sort_by(|x, y| x.0.total_cmp(&y.0));
        // Predict A below the cut and B above it; the flipped rule scores n - hits.
        let mut a_below = 0usize;
        let mut b_below = 0usize;
        let mut i = 0;
        loop {
            let hits = a_below + (total_b - b_below);
            best = best.max(hits).max(n - hits);
            if i == n {
                break;
            }
            let v = proj[i].0;
            while i < n && proj[i].0 == v {
                match proj[i].1 {
                    Side::A => a_below += 1,
                    Side::B => b_below += 1,
                }
                i += 1;
            }
        }
    }
    best as f64 / n as f64
}
