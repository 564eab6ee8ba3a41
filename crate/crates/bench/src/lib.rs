//! Fixtures shared by the kernel benchmarks.

use condensa_core::datasets::gen_motif_stream;
use condensa_core::metric::{FiniteMetricSpace, PointCloud};
use condensa_core::quotient::Partition;
use condensa_core::rng::Rng;
use condensa_core::Stream;

/// `n` uniform points in the unit square as a dense space.
pub fn random_space(n: usize, seed: u64) -> FiniteMetricSpace {
    let mut rng = Rng::new(seed);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect();
    FiniteMetricSpace::from_metric(&PointCloud::from_points(&pts))
        .expect("euclidean points form a metric")
}

/// Consecutive blocks of `width` points.
pub fn block_partition(n: usize, width: usize) -> Partition {
    Partition::from_labels(&(0..n).map(|i| i / width).collect::<Vec<_>>())
}

pub fn motif_stream(samples: usize) -> Stream {
    gen_motif_stream(10, samples.div_ceil(10), 0.0, 5).expect("valid motif parameters")
}
