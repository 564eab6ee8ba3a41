//! The condensation engine: builds the tower M0 -> M1 -> ... -> MD from a
//! stream by contracting validated regions level after level, and checks the
//! telescoping capacity bound.

use std::fmt;

use crate::cover::{
    covering_number_exact, covering_number_greedy, is_cover, CoverMethod, CoverResult, N_EXACT_MAX,
};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Metric, PointCloud};
use crate::quotient::{build_quotient_at, merge_intervals, token_id, Partition, Token};
use crate::separator::{quantize, urysohn_separator};

/// An ordered sample sequence under the euclidean rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    points: PointCloud,
    length: f64,
    seed: u64,
}

impl Stream {
    pub fn new(points: PointCloud, seed: u64) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidStream(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        let length = (1..n).map(|i| points.dist(i - 1, i)).sum();
        Ok(Self {
            points,
            length,
            seed,
        })
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    /// Total path length: the sum of consecutive-sample distances.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest distance between consecutive samples.
    pub fn max_step(&self) -> f64 {
        (1..self.n_samples())
            .map(|i| self.points.dist(i - 1, i))
            .fold(0.0, f64::max)
    }
}

/// What counts as a validated region at each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Consecutive non-overlapping windows of `width` points.
    Window { width: usize },
    /// Windows of `len` points recurring at least `min_repeats` times.
    Motif { len: usize, min_repeats: usize },
    /// Binned level sets of the separator between the level's first and last point.
    Fiber { n_bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensationPolicy {
    pub kind: PolicyKind,
    /// Only regions with internal diameter at most this are eligible.
    pub diameter_cap: f64,
}

impl CondensationPolicy {
    pub fn window(width: usize, diameter_cap: f64) -> Self {
        Self {
            kind: PolicyKind::Window { width },
            diameter_cap,
        }
    }

    pub fn motif(len: usize, min_repeats: usize, diameter_cap: f64) -> Self {
        Self {
            kind: PolicyKind::Motif { len, min_repeats },
            diameter_cap,
        }
    }

    pub fn fiber(n_bins: usize, diameter_cap: f64) -> Self {
        Self {
            kind: PolicyKind::Fiber { n_bins },
            diameter_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_cap > 0.0 && self.diameter_cap.is_finite()) {
            return Err(Error::InvalidPolicy(format!(
                "diameter cap {}",
                self.diameter_cap
            )));
        }
        match self.kind {
            PolicyKind::Window { width } if width < 2 => Err(Error::InvalidPolicy(
                "window width must be at least 2".into(),
            )),
            PolicyKind::Motif { len, min_repeats } if len == 0 || min_repeats == 0 => Err(
                Error::InvalidPolicy("motif length and repeats must be positive".into()),
            ),
            PolicyKind::Fiber { n_bins } if n_bins < 2 => Err(Error::InvalidBins(n_bins)),
            _ => Ok(()),
        }
    }
}

/// A level of the tower: the raw stream or a dense quotient.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelSpace {
    Stream(PointCloud),
    Dense(FiniteMetricSpace),
}

impl Metric for LevelSpace {
    fn len(&self) -> usize {
        match self {
            LevelSpace::Stream(p) => p.len(),
            LevelSpace::Dense(s) => s.len(),
        }
    }

    #[inline]
    fn dist(&self, i: usize, j: usize) -> f64 {
        match self {
            LevelSpace::Stream(p) => p.dist(i, j),
            LevelSpace::Dense(s) => s.dist(i, j),
        }
    }
}

impl LevelSpace {
    pub fn id(&self, level: usize, i: usize) -> String {
        match self {
            LevelSpace::Stream(_) => format!("S{i}"),
            LevelSpace::Dense(s) if level == 0 => s.id(i).to_string(),
            LevelSpace::Dense(_) => token_id(level, i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Top-level covering number is within budget.
    BudgetReached,
    /// Stopped at the depth limit before reaching budget.
    MaxDepth,
    /// No eligible region remained before budget was reached.
    Incompressible,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::BudgetReached => "BUDGET_REACHED",
            Verdict::MaxDepth => "MAX_DEPTH",
            Verdict::Incompressible => "INCOMPRESSIBLE",
        })
    }
}

/// The tower of spaces with its quotient maps, per-level covers and tokens.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<LevelSpace>,
    /// `maps[k]` partitions the points of `levels[k]` into the points of `levels[k + 1]`.
    pub maps: Vec<Partition>,
    /// For fiber towers, the bin count quantizing the separator at each map.
    pub fiber_bins: Vec<Option<usize>>,
    pub tokens: Vec<Token>,
    pub epsilon: f64,
    pub covers: Vec<CoverResult>,
    /// Per level, per point: inclusive intervals of level-0 indices.
    pub provenance: Vec<Vec<Vec<(usize, usize)>>>,
    pub verdict: Verdict,
}

pub const HIERARCHY_CSV_HEADER: &str = "level,n_points,N_eps,method,rho_hat,n_tokens";

impl Hierarchy {
    pub fn depth(&self) -> usize {
        self.maps.len()
    }

    pub fn n_per_level(&self) -> Vec<usize> {
        self.covers.iter().map(|c| c.size).collect()
    }

    /// Measured per-step ratios `N_k / N_{k+1}`.
    pub fn rho_hat(&self) -> Vec<f64> {
        self.covers
            .windows(2)
            .map(|w| w[0].size as f64 / w[1].size as f64)
            .collect()
    }

    pub fn top(&self) -> &LevelSpace {
        self.levels.last().expect("hierarchy has a base level")
    }

    pub fn tokens_at(&self, level: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.level == level)
    }

    /// Image of a level-0 point at `level`.
    pub fn lift(&self, point: usize, level: usize) -> Result<usize> {
        if point >= self.levels[0].len() {
            return Err(Error::UnknownPoint(point));
        }
        Ok(self.maps[..level].iter().fold(point, |p, m| m.class_of(p)))
    }

    pub fn report_rows(&self) -> Vec<String> {
        let rho = self.rho_hat();
        (0..self.levels.len())
            .map(|k| {
                let rho_k = if k == 0 {
                    String::new()
                } else {
                    rho[k - 1].to_string()
                };
                format!(
                    "{},{},{},{},{},{}",
                    k,
                    self.levels[k].len(),
                    self.covers[k].size,
                    self.covers[k].method,
                    rho_k,
                    self.tokens_at(k).count()
                )
            })
            .collect()
    }
}

/// Cover of a level. Levels up to [`N_EXACT_MAX`] points are solved exactly;
/// larger ones take the smaller of the greedy cover and the image of the
/// previous level's centers (a valid cover because quotient maps are
/// surjective and 1-Lipschitz), so covering numbers never increase.
fn level_cover<M: Metric>(
    space: &M,
    eps: f64,
    previous: Option<(&CoverResult, &Partition)>,
) -> Result<CoverResult> {
    if space.len() <= N_EXACT_MAX {
        return covering_number_exact(space, eps);
    }
    let mut greedy = covering_number_greedy(space, eps)?;
    if let Some((prev, map)) = previous {
        let mut image: Vec<usize> = prev.centers.iter().map(|&c| map.class_of(c)).collect();
        image.sort_unstable();
        image.dedup();
        if image.len() < greedy.size {
            debug_assert!(is_cover(space, eps, &image));
            greedy.optimality_gap -= greedy.size - image.len();
            greedy.size = image.len();
            greedy.centers = image;
            greedy.method = CoverMethod::Greedy;
        }
    }
    Ok(greedy)
}

fn window_diameter<M: Metric>(space: &M, start: usize, len: usize) -> f64 {
    let mut best = 0.0f64;
    for a in start..start + len {
        for b in (a + 1)..start + len {
            best = best.max(space.dist(a, b));
        }
    }
    best
}

/// Two windows match when their internal distance profiles agree entrywise
/// within `tol`, a comparison invariant to where each occurrence sits.
fn profiles_match<M: Metric>(space: &M, i: usize, j: usize, len: usize, tol: f64) -> bool {
    for a in 0..len {
        for b in (a + 1)..len {
            if (space.dist(i + a, i + b) - space.dist(j + a, j + b)).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Selects disjoint regions of consecutive points per the policy.
pub fn select_regions<M: Metric>(
    space: &M,
    policy: &CondensationPolicy,
) -> Result<Vec<Vec<usize>>> {
    let n = space.len();
    let cap = policy.diameter_cap;
    let regions = match policy.kind {
        PolicyKind::Window { width } => {
            let mut out = Vec::new();
            let mut i = 0;
            while i + width <= n {
                if window_diameter(space, i, width) <= cap {
                    out.push((i..i + width).collect());
                    i += width;
                } else {
                    i += 1;
                }
            }
            out
        }
        PolicyKind::Motif { len, min_repeats } => {
            if len < 2 || n < len {
                return Ok(Vec::new());
            }
            let n_windows = n - len + 1;
            let eligible: Vec<bool> = (0..n_windows)
                .map(|i| window_diameter(space, i, len) <= cap)
                .collect();
            let mut taken = vec![false; n];
            let mut out = Vec::new();
            let mut i = 0;
            while i < n_windows {
                if !eligible[i] || taken[i..i + len].iter().any(|&t| t) {
                    i += 1;
                    continue;
                }
                let mut occurrences = vec![i];
                let mut j = i + len;
                while j < n_windows {
                    if eligible[j]
                        && !taken[j..j + len].iter().any(|&t| t)
                        && profiles_match(space, i, j, len, cap)
                    {
                        occurrences.push(j);
                        j += len;
                    } else {
                        j += 1;
                    }
                }
                if occurrences.len() >= min_repeats {
                    for &o in &occurrences {
                        taken[o..o + len].iter_mut().for_each(|t| *t = true);
                        out.push((o..o + len).collect());
                    }
                    i += len;
                } else {
                    i += 1;
                }
            }
            out.sort_unstable_by_key(|r: &Vec<usize>| r[0]);
            out
        }
        PolicyKind::Fiber { n_bins } => {
            if n < 3 {
                return Ok(Vec::new());
            }
            let f = urysohn_separator(space, &[0], &[n - 1])?;
            let mut fibers: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for (p, &v) in f.values().iter().enumerate() {
                fibers.entry(quantize(v, n_bins).0).or_default().push(p);
            }
            let mut out: Vec<Vec<usize>> = fibers
                .into_values()
                .filter(|m| m.len() >= 2 && set_diameter(space, m) <= cap)
                .collect();
            out.sort_unstable_by_key(|r| r[0]);
            out
        }
    };
    Ok(regions)
}

fn set_diameter<M: Metric>(space: &M, members: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for (k, &a) in members.iter().enumerate() {
        for &b in &members[k + 1..] {
            best = best.max(space.dist(a, b));
        }
    }
    best
}

/// Builds the tower over `stream`, stopping when the covering number is within
/// `budget`, when `max_depth` levels exist, or when no region is eligible, in
/// that order of precedence.
pub fn build_hierarchy(
    stream: &Stream,
    policy: &CondensationPolicy,
    epsilon: f64,
    budget: usize,
    max_depth: usize,
) -> Result<Hierarchy> {
    build_hierarchy_from(
        LevelSpace::Stream(stream.points().clone()),
        policy,
        epsilon,
        budget,
        max_depth,
    )
}

pub fn build_hierarchy_from(
    base: LevelSpace,
    policy: &CondensationPolicy,
    epsilon: f64,
    budget: usize,
    max_depth: usize,
) -> Result<Hierarchy> {
    policy.validate()?;
    if budget == 0 {
        return Err(Error::InvalidPolicy("budget must be positive".into()));
    }
    let n0 = base.len();
    let mut h = Hierarchy {
        covers: vec![level_cover(&base, epsilon, None)?],
        provenance: vec![(0..n0).map(|i| vec![(i, i)]).collect()],
        levels: vec![base],
        maps: Vec::new(),
        fiber_bins: Vec::new(),
        tokens: Vec::new(),
        epsilon,
        verdict: Verdict::BudgetReached,
    };
    loop {
        let k = h.depth();
        if h.covers[k].size <= budget {
            h.verdict = Verdict::BudgetReached;
            break;
        }
        if k >= max_depth {
            h.verdict = Verdict::MaxDepth;
            break;
        }
        let regions = select_regions(&h.levels[k], policy)?;
        if regions.is_empty() {
            h.verdict = Verdict::Incompressible;
            break;
        }
        let n = h.levels[k].len();
        let mut labels: Vec<usize> = (0..n).collect();
        for r in &regions {
            for &p in r {
                labels[p] = r[0];
            }
        }
        push_level(&mut h, Partition::from_labels(&labels), None)?;
    }
    Ok(h)
}

/// Quotients the top level by `partition` and records the new level.
pub(crate) fn push_level(
    h: &mut Hierarchy,
    partition: Partition,
    bins: Option<usize>,
) -> Result<()> {
    let k = h.depth();
    let q = build_quotient_at(h.top(), &partition, k + 1)?;
    let prov: Vec<Vec<(usize, usize)>> = q
        .partition
        .classes()
        .iter()
        .map(|members| {
            merge_intervals(
                members
                    .iter()
                    .flat_map(|&m| h.provenance[k][m].iter().copied())
                    .collect(),
            )
        })
        .collect();
    for (c, members) in q.partition.classes().iter().enumerate() {
        if members.len() >= 2 {
            h.tokens.push(Token {
                id: token_id(k + 1, c),
                class_id: c,
                level: k + 1,
                members: members.clone(),
                provenance: prov[c].clone(),
            });
        }
    }
    let space = LevelSpace::Dense(q.space);
    let cover = level_cover(&space, h.epsilon, Some((&h.covers[k], &q.partition)))?;
    h.levels.push(space);
    h.maps.push(q.partition);
    h.fiber_bins.push(bins);
    h.provenance.push(prov);
    h.covers.push(cover);
    Ok(())
}

/// Smallest depth `D >= 0` with `d * rho^D >= N0`, i.e. `ceil(log_rho(N0 / d))`.
pub fn required_depth(n0: usize, budget: usize, rho: f64) -> Result<usize> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::InvalidRho(rho));
    }
    if n0 == 0 || budget == 0 {
        return Err(Error::InvalidPolicy(
            "N0 and budget must be positive".into(),
        ));
    }
    let mut reach = budget as f64;
    let mut depth = 0;
    while reach < n0 as f64 {
        reach *= rho;
        depth += 1;
    }
    Ok(depth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelescopingReport {
    pub rho: f64,
    pub n_per_level: Vec<usize>,
    /// Whether `N_{k+1} <= N_k / rho` held for each step k.
    pub step_holds: Vec<bool>,
    pub first_violation: Option<usize>,
    /// `N_D <= rho^-D N_0`, in integer arithmetic when rho is integral.
    pub bound_holds: bool,
    pub pass: bool,
}

/// Checks the compressibility hypothesis at every step and the telescoped bound.
pub fn verify_telescoping(h: &Hierarchy, rho: f64) -> Result<TelescopingReport> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::InvalidRho(rho));
    }
    let ns = h.n_per_level();
    Ok(telescoping_from_counts(&ns, rho))
}

pub fn telescoping_from_counts(ns: &[usize], rho: f64) -> TelescopingReport {
    let step_holds: Vec<bool> = ns
        .windows(2)
        .map(|w| (w[1] as f64) * rho <= w[0] as f64)
        .collect();
    let first_violation = step_holds.iter().position(|ok| !ok);
    let depth = ns.len().saturating_sub(1) as u32;
    let (n0, nd) = (ns[0], ns[ns.len() - 1]);
    let bound_holds = if rho.fract() == 0.0 && rho < u64::MAX as f64 {
        match (rho as u128).checked_pow(depth) {
            Some(scale) => (nd as u128)
                .checked_mul(scale)
                .is_some_and(|v| v <= n0 as u128),
            None => nd == 0,
        }
    } else {
        nd as f64 <= n0 as f64 / rho.powi(depth as i32)
    };
    TelescopingReport {
        rho,
        n_per_level: ns.to_vec(),
        pass: first_violation.is_none() && bound_holds,
        step_holds,
        first_violation,
        bound_holds,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub samples: usize,
    pub n0: usize,
    pub depth: usize,
    pub formula: usize,
    pub verdict: Verdict,
}

pub const DEPTH_CSV_HEADER: &str = "L,N0,D_achieved,D_formula";

impl DepthRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.samples, self.n0, self.depth, self.formula
        )
    }
}

/// For each stream, builds the tower to `budget` and pairs the achieved depth
/// with the formula value at `rho_target`.
pub fn depth_vs_length_experiment(
    streams: &[Stream],
    policy: &CondensationPolicy,
    epsilon: f64,
    budget: usize,
    rho_target: f64,
    max_depth: usize,
) -> Result<Vec<DepthRow>> {
    streams
        .iter()
        .map(|s| {
            let h = build_hierarchy(s, policy, epsilon, budget, max_depth)?;
            let n0 = h.covers[0].size;
            Ok(DepthRow {
                samples: s.n_samples(),
                n0,
                depth: h.depth(),
                formula: required_depth(n0, budget, rho_target)?,
                verdict: h.verdict,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, h: f64) -> Stream {
        let pts: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
        Stream::new(PointCloud::from_points(&pts), 0).unwrap()
    }

    #[test]
    fn required_depth_examples() {
        assert_eq!(required_depth(1024, 1, 2.0).unwrap(), 10);
        assert_eq!(required_depth(7, 7, 2.0).unwrap(), 0);
        assert_eq!(required_depth(3, 7, 2.0).unwrap(), 0);
        assert_eq!(required_depth(1000, 10, 2.0).unwrap(), 7);
        assert_eq!(required_depth(10, 1, 1.0), Err(Error::InvalidRho(1.0)));
    }

    #[test]
    fn telescoping_examples() {
        let ok = telescoping_from_counts(&[100, 50, 25, 12], 2.0);
        assert!(ok.pass && ok.bound_holds);
        let bad = telescoping_from_counts(&[100, 60], 2.0);
        assert!(!bad.pass);
        assert_eq!(bad.first_violation, Some(0));
        let flat = telescoping_from_counts(&[42], 2.0);
        assert!(flat.pass && flat.step_holds.is_empty());
    }

    #[test]
    fn stream_length_is_path_length() {
        let s = line(11, 0.5);
        assert!((s.length() - 5.0).abs() < 1e-12);
        assert!(Stream::new(PointCloud::from_points(&[[0.0, 0.0]]), 0).is_err());
    }

    #[test]
    fn pair_windows_halve_a_line() {
        let s = line(32, 1.0);
        let h = build_hierarchy(&s, &CondensationPolicy::window(2, 1.0), 0.5, 1, 10).unwrap();
        assert_eq!(h.n_per_level(), vec![32, 16, 8, 4, 2, 1]);
        assert_eq!(h.verdict, Verdict::BudgetReached);
        assert!(verify_telescoping(&h, 2.0).unwrap().pass);
        // every sample is accounted for by exactly one top-level point
        let top = h.provenance.last().unwrap();
        assert_eq!(top, &vec![vec![(0, 31)]]);
    }

    #[test]
    fn max_depth_zero_is_base_only() {
        let s = line(16, 1.0);
        let h = build_hierarchy(&s, &CondensationPolicy::window(2, 1.0), 0.5, 1, 0).unwrap();
        assert_eq!(h.depth(), 0);
        assert_eq!(h.verdict, Verdict::MaxDepth);
    }

    #[test]
    fn budget_above_n0_means_no_levels() {
        let s = line(16, 1.0);
        let h = build_hierarchy(&s, &CondensationPolicy::window(2, 1.0), 0.5, 100, 5).unwrap();
        assert_eq!(h.depth(), 0);
        assert_eq!(h.verdict, Verdict::BudgetReached);
    }

    #[test]
    fn oversized_windows_are_incompressible() {
        let s = line(16, 1.0);
        let h = build_hierarchy(&s, &CondensationPolicy::window(2, 0.5), 0.5, 1, 5).unwrap();
        assert_eq!(h.verdict, Verdict::Incompressible);
        assert_eq!(h.depth(), 0);
    }

    #[test]
    fn one_shot_total_collapse() {
        let s = line(24, 0.1);
        let policy = CondensationPolicy::window(24, 10.0);
        let h = build_hierarchy(&s, &policy, 0.01, 1, 5).unwrap();
        assert_eq!(h.depth(), 1);
        assert_eq!(h.n_per_level(), vec![24, 1]);
    }

    #[test]
    fn lift_follows_maps() {
        let s = line(8, 1.0);
        let h = build_hierarchy(&s, &CondensationPolicy::window(2, 1.0), 0.5, 1, 10).unwrap();
        assert_eq!(h.lift(5, 1).unwrap(), 2);
        assert_eq!(h.lift(5, 2).unwrap(), 1);
        assert_eq!(h.lift(5, 3).unwrap(), 0);
        assert!(h.lift(99, 1).is_err());
    }
}
