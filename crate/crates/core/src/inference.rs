//! Slow recursive reachability on the raw stream versus fast navigation on a
//! condensed level, with explicit cost accounting.

use crate::error::{Error, Result};
use crate::hierarchy::{build_hierarchy, CondensationPolicy, Hierarchy, Stream};
use crate::metric::Metric;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub distance_evaluations: u64,
    pub candidate_evaluations: u64,
    pub recursion_depth_max: u32,
    pub wall_notes: String,
}

/// Number of hops of at most `hop_radius` needed to cover distance `d`.
fn hops_needed(d: f64, hop_radius: f64) -> f64 {
    (d / hop_radius).ceil()
}

fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Midpoint-recursive reachability: can `goal` be reached from `start` in at
/// most `2^k` hops of length at most `hop_radius` through stream points? Each
/// call costs one distance evaluation. Intermediate points are tried median
/// first, then in stream order.
pub fn slow_verify<M: Metric>(
    space: &M,
    start: usize,
    goal: usize,
    hop_radius: f64,
    depth_limit: Option<u32>,
    ledger: &mut CostLedger,
) -> Result<bool> {
    let n = space.len();
    for p in [start, goal] {
        if p >= n {
            return Err(Error::UnknownPoint(p));
        }
    }
    if !(hop_radius > 0.0 && hop_radius.is_finite()) {
        return Err(Error::InvalidEpsilon(hop_radius));
    }
    let k = depth_limit.unwrap_or_else(|| ceil_log2(start.abs_diff(goal)));
    let d = space.dist(start, goal);
    ledger.distance_evaluations += 1;
    if d <= hop_radius {
        return Ok(true);
    }
    let reach = 2f64.powi(k as i32);
    let needed = hops_needed(d, hop_radius);
    if needed > reach {
        return Err(Error::DepthExhausted {
            depth: k,
            reach,
            needed,
        });
    }
    Ok(split(space, start, goal, k, hop_radius, 0, ledger))
}

fn reach<M: Metric>(
    space: &M,
    a: usize,
    b: usize,
    k: u32,
    hop: f64,
    depth: u32,
    ledger: &mut CostLedger,
) -> bool {
    ledger.recursion_depth_max = ledger.recursion_depth_max.max(depth);
    let d = space.dist(a, b);
    ledger.distance_evaluations += 1;
    if d <= hop {
        return true;
    }
    if k == 0 || hops_needed(d, hop) > 2f64.powi(k as i32) {
        return false;
    }
    split(space, a, b, k, hop, depth, ledger)
}

fn split<M: Metric>(
    space: &M,
    a: usize,
    b: usize,
    k: u32,
    hop: f64,
    depth: u32,
    ledger: &mut CostLedger,
) -> bool {
    let (lo, hi) = (a.min(b), a.max(b));
    if hi - lo < 2 {
        return false;
    }
    let median = lo + (hi - lo) / 2;
    let order = std::iter::once(median).chain((lo + 1..hi).filter(|&m| m != median));
    for m in order {
        if reach(space, a, m, k - 1, hop, depth + 1, ledger)
            && reach(space, m, b, k - 1, hop, depth + 1, ledger)
        {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct Navigation {
    pub level: usize,
    /// Token ids visited; consecutive tokens are within epsilon of each other.
    pub path: Vec<String>,
    pub path_points: Vec<usize>,
    pub steps: usize,
    pub max_candidates_per_step: u64,
}

/// Navigation at the top level of `h`.
pub fn fast_navigate(
    h: &Hierarchy,
    start: usize,
    goal: usize,
    ledger: &mut CostLedger,
) -> Result<Navigation> {
    fast_navigate_at(h, h.depth(), start, goal, ledger)
}

/// Greedy navigation between the images of level-0 points `start` and `goal`
/// at `level`. The active region is the whole level; each step scores only
/// the centers of the level's epsilon-cover by distance to the goal and moves
/// to the best unvisited center whose cell touches the current cell, falling
/// back along the path on dead ends. Moves between cells go through a
/// witnessing pair of points within epsilon, so every hop is at most epsilon.
pub fn fast_navigate_at(
    h: &Hierarchy,
    level: usize,
    start: usize,
    goal: usize,
    ledger: &mut CostLedger,
) -> Result<Navigation> {
    if level > h.depth() {
        return Err(Error::InvalidPolicy(format!(
            "level {level} above depth {}",
            h.depth()
        )));
    }
    let space = &h.levels[level];
    let eps = h.epsilon;
    let centers = &h.covers[level].centers;
    let s = h.lift(start, level)?;
    let g = h.lift(goal, level)?;
    let n = space.len();

    // Cell of each point: its first center within epsilon.
    let cell: Vec<usize> = (0..n)
        .map(|y| {
            centers
                .iter()
                .position(|&c| space.dist(y, c) <= eps)
                .expect("cover centers reach every point")
        })
        .collect();
    let m = centers.len();
    let mut members = vec![Vec::new(); m];
    for (y, &c) in cell.iter().enumerate() {
        members[c].push(y);
    }
    // Adjacent cells with the first witnessing pair.
    let mut link: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; m]; m];
    for y in 0..n {
        for z in (y + 1)..n {
            let (cy, cz) = (cell[y], cell[z]);
            if cy != cz && link[cy][cz].is_none() && space.dist(y, z) <= eps {
                link[cy][cz] = Some((y, z));
                link[cz][cy] = Some((z, y));
            }
        }
    }
    ledger.wall_notes = format!("level {level}: {m} cells, cell structure precomputed");

    let (start_cell, goal_cell) = (cell[s], cell[g]);
    let mut trail = vec![start_cell];
    let mut visited = vec![false; m];
    visited[start_cell] = true;
    let mut steps = 0usize;
    let mut max_cand = 0u64;
    while *trail.last().unwrap() != goal_cell {
        let cur = *trail.last().unwrap();
        steps += 1;
        let mut best: Option<(f64, usize)> = None;
        let mut evaluated = 0u64;
        for (ci, &c) in centers.iter().enumerate() {
            let score = space.dist(c, g);
            evaluated += 1;
            if !visited[ci] && link[cur][ci].is_some() && best.is_none_or(|(b, _)| score < b) {
                best = Some((score, ci));
            }
        }
        assert!(
            evaluated <= m as u64,
            "candidate evaluations exceed the cover size"
        );
        ledger.candidate_evaluations += evaluated;
        max_cand = max_cand.max(evaluated);
        match best {
            Some((_, next)) => {
                visited[next] = true;
                trail.push(next);
            }
            None => {
                trail.pop();
                if trail.is_empty() {
                    return Err(Error::NoPath {
                        start: space.id(level, s),
                        goal: space.id(level, g),
                    });
                }
            }
        }
    }

    let mut points = vec![s];
    let push = |p: usize, pts: &mut Vec<usize>| {
        if *pts.last().unwrap() != p {
            pts.push(p);
        }
    };
    push(centers[trail[0]], &mut points);
    for w in trail.windows(2) {
        let (y, z) = link[w[0]][w[1]].expect("trail follows adjacent cells");
        push(y, &mut points);
        push(z, &mut points);
        push(centers[w[1]], &mut points);
    }
    push(g, &mut points);
    Ok(Navigation {
        level,
        path: points.iter().map(|&p| space.id(level, p)).collect(),
        path_points: points,
        steps,
        max_candidates_per_step: max_cand,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub samples: usize,
    pub slow_dist_evals: u64,
    pub fast_steps: usize,
    pub fast_cand_per_step_max: u64,
    pub depth: usize,
    pub top_cover: usize,
}

pub const SCALING_CSV_HEADER: &str = "L,slow_dist_evals,fast_steps,fast_cand_per_step_max,depth";

impl ScalingRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.samples,
            self.slow_dist_evals,
            self.fast_steps,
            self.fast_cand_per_step_max,
            self.depth
        )
    }
}

/// Slow verification from first to last sample on each raw stream, against
/// fast navigation on its condensed tower built to `budget`.
pub fn cost_scaling_report(
    streams: &[Stream],
    policy: &CondensationPolicy,
    epsilon: f64,
    budget: usize,
    max_depth: usize,
) -> Result<Vec<ScalingRow>> {
    streams
        .iter()
        .map(|stream| {
            let n = stream.n_samples();
            let mut slow = CostLedger::default();
            let ok = slow_verify(
                stream.points(),
                0,
                n - 1,
                stream.max_step(),
                None,
                &mut slow,
            )?;
            if !ok {
                return Err(Error::ExperimentFailed(format!(
                    "slow verification failed on {n} samples"
                )));
            }
            let h = build_hierarchy(stream, policy, epsilon, budget, max_depth)?;
            let mut fast = CostLedger::default();
            let nav = fast_navigate(&h, 0, n - 1, &mut fast)?;
            Ok(ScalingRow {
                samples: n,
                slow_dist_evals: slow.distance_evaluations,
                fast_steps: nav.steps,
                fast_cand_per_step_max: nav.max_candidates_per_step,
                depth: h.depth(),
                top_cover: h.covers[h.depth()].size,
            })
        })
        .collect()
}
