//! Synthetic data: interleaved spirals, motif streams and noise streams.

use crate::error::{Error, Result};
use crate::hierarchy::Stream;
use crate::metric::{FiniteMetricSpace, PointCloud};
use crate::rng::Rng;
use crate::separator::Side;

/// Nominal step length of a motif stream.
pub const MOTIF_STEP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct SpiralDataset {
    pub n_per_class: usize,
    pub turns: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Class A first, then class B.
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<Side>,
}

impl SpiralDataset {
    pub fn space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::from_metric(&PointCloud::from_points(&self.points))
    }

    pub fn a_indices(&self) -> Vec<usize> {
        (0..self.n_per_class).collect()
    }

    pub fn b_indices(&self) -> Vec<usize> {
        (self.n_per_class..2 * self.n_per_class).collect()
    }
}

/// Two interleaved Archimedean spirals, one the point reflection of the other.
pub fn gen_spiral(
    n_per_class: usize,
    turns: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<SpiralDataset> {
    if n_per_class == 0
        || turns.is_nan()
        || turns <= 0.0
        || noise_sigma.is_nan()
        || noise_sigma < 0.0
    {
        return Err(Error::InvalidTask(format!(
            "spiral needs n > 0, turns > 0, sigma >= 0 (got {n_per_class}, {turns}, {noise_sigma})"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut points = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (sign, side) in [(1.0, Side::A), (-1.0, Side::B)] {
        for i in 0..n_per_class {
            let phi = std::f64::consts::TAU * turns * (i + 1) as f64 / n_per_class as f64;
            let r = 0.1 * phi;
            let x = sign * r * phi.cos() + noise_sigma * rng.normal();
            let y = sign * r * phi.sin() + noise_sigma * rng.normal();
            points.push([x, y]);
            labels.push(side);
        }
    }
    Ok(SpiralDataset {
        n_per_class,
        turns,
        noise_sigma,
        seed,
        points,
        labels,
    })
}

/// A drifting planar trajectory repeating a random step pattern `n_repeats`
/// times. Steps have x-component in [0.6, 1.0] * MOTIF_STEP and y-component in
/// [-0.8, 0.8] * MOTIF_STEP, so x increases strictly. Each sample is then moved
/// uniformly within a disk of radius `jitter`.
pub fn gen_motif_stream(
    motif_len: usize,
    n_repeats: usize,
    jitter: f64,
    seed: u64,
) -> Result<Stream> {
    if motif_len == 0 || n_repeats == 0 || jitter.is_nan() || jitter < 0.0 {
        return Err(Error::InvalidStream(format!(
            "motif_len {motif_len}, n_repeats {n_repeats}, jitter {jitter}"
        )));
    }
    let mut rng = Rng::new(seed);
    let steps: Vec<[f64; 2]> = (0..motif_len)
        .map(|_| {
            let dx = MOTIF_STEP * rng.uniform_in(0.6, 1.0);
            let dy = MOTIF_STEP * rng.uniform_in(-0.8, 0.8);
            [dx, dy]
        })
        .collect();
    let n = motif_len * n_repeats;
    let mut pos = [0.0, 0.0];
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let j = rng.in_disk(jitter);
        points.push([pos[0] + j[0], pos[1] + j[1]]);
        let s = steps[i % motif_len];
        pos = [pos[0] + s[0], pos[1] + s[1]];
    }
    Stream::new(PointCloud::from_points(&points), seed)
}

/// `n` i.i.d. uniform samples in the unit square.
pub fn gen_noise_stream(n: usize, seed: u64) -> Result<Stream> {
    let mut rng = Rng::new(seed);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect();
    Stream::new(PointCloud::from_points(&points), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Metric;

    #[test]
    fn spiral_shape() {
        let s = gen_spiral(100, 4.0, 0.05, 7).unwrap();
        assert_eq!(s.points.len(), 200);
        assert_eq!(s.labels.iter().filter(|&&l| l == Side::A).count(), 100);
        assert_eq!(s, gen_spiral(100, 4.0, 0.05, 7).unwrap());
        let clean = gen_spiral(10, 1.0, 0.0, 0).unwrap();
        for i in 0..10 {
            assert_eq!(clean.points[i][0], -clean.points[i + 10][0]);
        }
    }

    #[test]
    fn single_repeat_is_the_motif() {
        let one = gen_motif_stream(8, 1, 0.0, 3).unwrap();
        let many = gen_motif_stream(8, 4, 0.0, 3).unwrap();
        assert_eq!(one.n_samples(), 8);
        assert_eq!(many.n_samples(), 32);
        for i in 0..8 {
            assert_eq!(one.points().point(i), many.points().point(i));
        }
    }

    #[test]
    fn clean_repeats_are_translated_copies() {
        let s = gen_motif_stream(5, 6, 0.0, 9).unwrap();
        let p = s.points();
        for r in 1..6 {
            for a in 0..5 {
                for b in 0..5 {
                    let d0 = p.dist(a, b);
                    let dr = p.dist(5 * r + a, 5 * r + b);
                    assert!((d0 - dr).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stream_x_strictly_increases_without_jitter() {
        let s = gen_motif_stream(7, 20, 0.0, 1).unwrap();
        let p = s.points();
        for i in 1..s.n_samples() {
            assert!(p.point(i)[0] > p.point(i - 1)[0]);
        }
        assert!(s.max_step() <= MOTIF_STEP * (1.0f64 + 0.64).sqrt());
    }

    #[test]
    fn noise_in_unit_square() {
        let s = gen_noise_stream(256, 5).unwrap();
        assert_eq!(s.n_samples(), 256);
        assert!(s.points().coords().iter().all(|c| (0.0..1.0).contains(c)));
    }
}
