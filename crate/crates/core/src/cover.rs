//! epsilon-covering numbers over closed balls centered at points of the space.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use crate::error::{Error, Result};
use crate::metric::{Metric, SegmentSpace};

/// Default point limit for [`covering_number_exact`].
pub const N_EXACT_MAX: usize = 24;

/// Limit used by [`segment_capacity_curve`]. Segment instances close at the
/// root of the branch-and-bound because greedy meets the counting bound.
pub const SEGMENT_EXACT_MAX: usize = 4096;

pub const COVER_CSV_HEADER: &str = "epsilon,N,method,optimality_gap,centers";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoverMethod {
    Exact,
    Greedy,
}

impl fmt::Display for CoverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverMethod::Exact => "exact",
            CoverMethod::Greedy => "greedy",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverResult {
    pub epsilon: f64,
    pub size: usize,
    pub centers: Vec<usize>,
    pub method: CoverMethod,
    /// 0 for exact covers; for greedy covers, `size` minus a packing lower bound.
    pub optimality_gap: usize,
}

impl CoverResult {
    /// One CSV row in [`COVER_CSV_HEADER`] order. Centers are written by id
    /// when `ids` is given, else by index.
    pub fn csv_row(&self, ids: Option<&[String]>) -> String {
        let centers: Vec<String> = self
            .centers
            .iter()
            .map(|&c| ids.map_or_else(|| c.to_string(), |ids| ids[c].clone()))
            .collect();
        format!(
            "{},{},{},{},{}",
            self.epsilon,
            self.size,
            self.method,
            self.optimality_gap,
            centers.join(";")
        )
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}

/// True when every point lies within `eps` of some center.
pub fn is_cover<M: Metric>(space: &M, eps: f64, centers: &[usize]) -> bool {
    (0..space.len()).all(|p| centers.iter().any(|&c| space.dist(p, c) <= eps))
}

/// Closed-ball neighbourhoods: `balls[c]` lists the points within `eps` of `c`.
fn neighbourhoods<M: Metric>(space: &M, eps: f64) -> Vec<Vec<usize>> {
    let n = space.len();
    let mut balls: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if space.dist(i, j) <= eps {
                balls[i].push(j);
                balls[j].push(i);
            }
        }
    }
    for b in &mut balls {
        b.sort_unstable();
    }
    balls
}

/// Size of a maximal set of points pairwise farther than `2 eps` apart. No
/// closed eps-ball holds two of them, so this bounds any cover from below.
pub fn packing_lower_bound<M: Metric>(space: &M, eps: f64) -> usize {
    let mut packed: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if packed.iter().all(|&q| space.dist(p, q) > 2.0 * eps) {
            packed.push(p);
        }
    }
    packed.len()
}

fn greedy_centers(n: usize, balls: &[Vec<usize>]) -> Vec<usize> {
    let mut uncovered = vec![true; n];
    let mut counts: Vec<usize> = balls.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = counts
        .iter()
        .enumerate()
        .map(|(c, &k)| (k, Reverse(c)))
        .collect();
    let mut remaining = n;
    let mut centers = Vec::new();
    while remaining > 0 {
        let Some((k, Reverse(c))) = heap.pop() else {
            break;
        };
        if k != counts[c] {
            // stale entry; counts only decrease so re-queue the fresh value
            if counts[c] > 0 {
                heap.push((counts[c], Reverse(c)));
            }
            continue;
        }
        if k == 0 {
            break;
        }
        centers.push(c);
        for &p in &balls[c] {
            if uncovered[p] {
                uncovered[p] = false;
                remaining -= 1;
                for &q in &balls[p] {
                    counts[q] -= 1;
                }
            }
        }
    }
    centers
}

/// Greedy max-coverage cover; ties go to the lowest point index.
pub fn covering_number_greedy<M: Metric>(space: &M, eps: f64) -> Result<CoverResult> {
    check_eps(eps)?;
    let n = space.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    let balls = neighbourhoods(space, eps);
    let centers = greedy_centers(n, &balls);
    let lower = packing_lower_bound(space, eps);
    Ok(CoverResult {
        epsilon: eps,
        size: centers.len(),
        optimality_gap: centers.len().saturating_sub(lower),
        centers,
        method: CoverMethod::Greedy,
    })
}

/// Minimum cover by branch-and-bound, limited to [`N_EXACT_MAX`] points.
pub fn covering_number_exact<M: Metric>(space: &M, eps: f64) -> Result<CoverResult> {
    covering_number_exact_limited(space, eps, N_EXACT_MAX)
}

/// Minimum cover by branch-and-bound over the ball/point incidence matrix,
/// seeded with the greedy cover as incumbent.
pub fn covering_number_exact_limited<M: Metric>(
    space: &M,
    eps: f64,
    max_points: usize,
) -> Result<CoverResult> {
    check_eps(eps)?;
    let n = space.len();
    if n == 0 {
        return Err(Error::EmptySpace);
    }
    if n > max_points {
        return Err(Error::TooLargeForExact {
            n,
            limit: max_points,
        });
    }
    let balls = neighbourhoods(space, eps);
    let words = n.div_ceil(64);
    let masks: Vec<Bits> = balls.iter().map(|b| Bits::from_indices(words, b)).collect();
    let incumbent = greedy_centers(n, &balls);
    let mut solver = BranchAndBound {
        masks: &masks,
        balls: &balls,
        best: incumbent,
        chosen: Vec::new(),
    };
    let lower = packing_lower_bound(space, eps);
    if solver.best.len() > lower {
        solver.search(Bits::full(words, n));
    }
    let mut centers = solver.best;
    centers.sort_unstable();
    Ok(CoverResult {
        epsilon: eps,
        size: centers.len(),
        centers,
        method: CoverMethod::Exact,
        optimality_gap: 0,
    })
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn from_indices(words: usize, idx: &[usize]) -> Self {
        let mut v = vec![0u64; words];
        for &i in idx {
            v[i / 64] |= 1 << (i % 64);
        }
        Bits(v)
    }

    fn full(words: usize, n: usize) -> Self {
        let mut v = vec![u64::MAX; words];
        if !n.is_multiple_of(64) {
            v[words - 1] = (1u64 << (n % 64)) - 1;
        }
        Bits(v)
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn and_count(&self, other: &Bits) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    fn minus(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & !b).collect())
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b)
            })
        })
    }
}

struct BranchAndBound<'a> {
    masks: &'a [Bits],
    balls: &'a [Vec<usize>],
    best: Vec<usize>,
    chosen: Vec<usize>,
}

impl BranchAndBound<'_> {
    fn search(&mut self, uncovered: Bits) {
        let remaining = uncovered.count();
        if remaining == 0 {
            if self.chosen.len() < self.best.len() {
                self.best = self.chosen.clone();
            }
            return;
        }
        let widest = self
            .masks
            .iter()
            .map(|m| m.and_count(&uncovered))
            .max()
            .unwrap_or(1)
            .max(1);
        if self.chosen.len() + remaining.div_ceil(widest) >= self.best.len() {
            return;
        }
        // branch on the uncovered point with the fewest covering balls
        let pivot = uncovered
            .iter()
            .min_by_key(|&p| (self.balls[p].len(), p))
            .expect("nonempty");
        let mut options: Vec<(usize, usize)> = self.balls[pivot]
            .iter()
            .map(|&c| (self.masks[c].and_count(&uncovered), c))
            .collect();
        options.sort_unstable_by_key(|&(gain, c)| (Reverse(gain), c));
        for (_, c) in options {
            self.chosen.push(c);
            self.search(uncovered.minus(&self.masks[c]));
            self.chosen.pop();
            if self.chosen.len() + 1 >= self.best.len() {
                return;
            }
        }
    }
}

/// Exact covering numbers of sampled segments of each length, the raw data
/// behind linear capacity growth.
pub fn segment_capacity_curve(
    lengths: &[f64],
    eps: f64,
    resolution: f64,
) -> Result<Vec<(f64, usize)>> {
    check_eps(eps)?;
    if resolution > eps / 4.0 {
        return Err(Error::ResolutionTooCoarse {
            resolution,
            epsilon: eps,
        });
    }
    lengths
        .iter()
        .map(|&l| {
            let seg = SegmentSpace::new(l, resolution)?;
            let cover = covering_number_exact_limited(&seg, eps, SEGMENT_EXACT_MAX)?;
            Ok((l, cover.size))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FiniteMetricSpace;

    fn uniform(n: usize, d: f64) -> FiniteMetricSpace {
        let mut m = vec![d; n * n];
        for i in 0..n {
            m[i * n + i] = 0.0;
        }
        FiniteMetricSpace::from_flat(n, m).unwrap()
    }

    #[test]
    fn equidistant_points() {
        let s = uniform(5, 1.0);
        assert_eq!(covering_number_exact(&s, 0.5).unwrap().size, 5);
        assert_eq!(covering_number_exact(&s, 1.0).unwrap().size, 1);
        let g = covering_number_greedy(&s, 1.0).unwrap();
        assert_eq!((g.size, g.centers.clone()), (1, vec![0]));
    }

    #[test]
    fn eps_at_least_diameter_gives_one() {
        let seg = SegmentSpace::new(3.0, 0.5).unwrap();
        assert_eq!(covering_number_greedy(&seg, 3.0).unwrap().size, 1);
        assert_eq!(covering_number_greedy(&seg, 7.5).unwrap().size, 1);
    }

    #[test]
    fn segment_ten_at_unit_radius() {
        let seg = SegmentSpace::new(10.0, 0.1).unwrap();
        let exact = covering_number_exact_limited(&seg, 1.0, SEGMENT_EXACT_MAX).unwrap();
        assert_eq!(exact.size, 5);
        assert!(is_cover(&seg, 1.0, &exact.centers));
        let greedy = covering_number_greedy(&seg, 1.0).unwrap();
        assert!((5..=7).contains(&greedy.size));
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = uniform(3, 1.0);
        assert_eq!(
            covering_number_greedy(&s, 0.0),
            Err(Error::InvalidEpsilon(0.0))
        );
        assert_eq!(
            covering_number_exact(&s, -1.0),
            Err(Error::InvalidEpsilon(-1.0))
        );
        let big = uniform(N_EXACT_MAX + 1, 1.0);
        assert_eq!(
            covering_number_exact(&big, 0.5),
            Err(Error::TooLargeForExact { n: 25, limit: 24 })
        );
        let empty = FiniteMetricSpace::from_flat(0, vec![]).unwrap();
        assert_eq!(covering_number_greedy(&empty, 1.0), Err(Error::EmptySpace));
    }

    #[test]
    fn capacity_curve_checks_resolution() {
        assert!(matches!(
            segment_capacity_curve(&[4.0], 1.0, 0.3),
            Err(Error::ResolutionTooCoarse { .. })
        ));
        let curve = segment_capacity_curve(&[2.0, 4.0, 8.0], 1.0, 0.1).unwrap();
        let ns: Vec<usize> = curve.iter().map(|c| c.1).collect();
        assert_eq!(ns, vec![1, 2, 4]);
    }

    #[test]
    fn csv_row_format() {
        let r = CoverResult {
            epsilon: 0.5,
            size: 2,
            centers: vec![0, 3],
            method: CoverMethod::Greedy,
            optimality_gap: 1,
        };
        assert_eq!(r.csv_row(None), "0.5,2,greedy,1,0;3");
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert_eq!(r.csv_row(Some(&ids)), "0.5,2,greedy,1,a;d");
    }
}
