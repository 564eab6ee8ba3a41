//! Acceptance criteria, one test per criterion. Each prints a single
//! PASS/FAIL line with its measurements and wall time.

use std::io::Write;
use std::time::{Duration, Instant};

use condensa_core::cover::{covering_number_exact, covering_number_greedy, segment_capacity_curve};
use condensa_core::datasets::{gen_motif_stream, gen_noise_stream, gen_spiral};
use condensa_core::hierarchy::{
    build_hierarchy, depth_vs_length_experiment, required_depth, verify_telescoping,
    CondensationPolicy, Stream, Verdict,
};
use condensa_core::inference::cost_scaling_report;
use condensa_core::metric::{FiniteMetricSpace, Metric, SegmentSpace};
use condensa_core::parity::{
    alternating_phase_run, conflicting_tasks, cross_interference_audit, forgetting_experiment,
    ForgettingConfig, Mode,
};
use condensa_core::quotient::{build_quotient, quotient_distance_oracle, Partition};
use condensa_core::rng::Rng;
use condensa_core::separator::{
    build_fiber_tower, fiber_quotient, linear_baseline_accuracy, recursive_separation_check,
    urysohn_separator, Side,
};
use condensa_core::Error;

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let pass = pass && elapsed <= limit;
    let line = format!(
        "[{}] AC{id} {name}: {detail} ({:.2}s / {}s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    // Written past the test harness capture so the lines show in plain `cargo test` output.
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{line}");
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Minimum number of closed eps-balls centered on sample points covering an
/// evenly sampled segment: sweep left to right, centering each ball on the
/// farthest sample that still reaches the leftmost uncovered one.
fn segment_cover_oracle(n: usize, h: f64, eps: f64) -> usize {
    let mut count = 0;
    let mut i = 0;
    while i < n {
        let mut c = i;
        while c + 1 < n && (c + 1 - i) as f64 * h <= eps {
            c += 1;
        }
        count += 1;
        i = c + 1;
        while i < n && (i - c) as f64 * h <= eps {
            i += 1;
        }
    }
    count
}

#[test]
fn ac1_segment_capacity_is_linear() {
    let t = Instant::now();
    let lengths = [2.0, 4.0, 6.0, 8.0, 10.0];
    let curve = segment_capacity_curve(&lengths, 1.0, 0.1).unwrap();
    let ns: Vec<f64> = curve.iter().map(|&(_, n)| n as f64).collect();
    let mut ok = true;
    for &(l, n) in &curve {
        let seg = SegmentSpace::new(l, 0.1).unwrap();
        ok &= n == segment_cover_oracle(seg.len(), 0.1, 1.0);
        ok &= (n as f64 - (l / 2.0).ceil()).abs() <= 1.0;
    }
    let s = slope(&lengths, &ns);
    ok &= (0.4..=0.6).contains(&s);
    report(
        1,
        "segment capacity",
        ok,
        &format!("N={ns:?} slope={s:.3}"),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

/// Pair windows on a clean motif stream, at a scale below the sample spacing
/// so every level's covering number is its point count.
fn telescoping_policy() -> CondensationPolicy {
    CondensationPolicy::window(2, 0.01)
}

const FINE_EPS: f64 = 0.002;

#[test]
fn ac2_telescoping_holds_at_every_level() {
    let t = Instant::now();
    let stream = gen_motif_stream(8, 32, 0.0, 1).unwrap();
    let budget = 1;
    let h = build_hierarchy(&stream, &telescoping_policy(), FINE_EPS, budget, 64).unwrap();
    let tel = verify_telescoping(&h, 2.0).unwrap();
    let ns = h.n_per_level();
    let depth = h.depth();
    let n0 = ns[0] as u128;
    let integer_bound = (ns[depth] as u128) << depth <= n0;
    let formula = required_depth(ns[0], budget, 2.0).unwrap();
    let ok =
        tel.pass && integer_bound && depth <= formula + 1 && h.verdict == Verdict::BudgetReached;
    report(
        2,
        "telescoping",
        ok,
        &format!(
            "N_k={ns:?} D={depth} formula={formula} verdict={}",
            h.verdict
        ),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn ac3_depth_grows_logarithmically() {
    let t = Instant::now();
    let sizes = [64usize, 128, 256, 512];
    let streams: Vec<Stream> = sizes
        .iter()
        .map(|&l| gen_motif_stream(8, l / 8, 0.0, 3).unwrap())
        .collect();
    let rows =
        depth_vs_length_experiment(&streams, &telescoping_policy(), FINE_EPS, 4, 2.0, 64).unwrap();
    let ds: Vec<f64> = rows.iter().map(|r| r.depth as f64).collect();
    let logs: Vec<f64> = sizes.iter().map(|&l| (l as f64).log2()).collect();
    let steady = rows
        .windows(2)
        .all(|w| w[1].depth >= w[0].depth && w[1].depth - w[0].depth <= 2);
    let s = slope(&logs, &ds);
    let ok = steady && (0.5..=2.0).contains(&s);
    report(
        3,
        "depth vs length",
        ok,
        &format!("D={ds:?} slope={s:.3}"),
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn ac4_collapse_makes_spirals_separable() {
    let t = Instant::now();
    let data = gen_spiral(100, 4.0, 0.05, 7).unwrap();
    let linear = linear_baseline_accuracy(&data.points, &data.labels, 10_000, 7);
    let space = data.space().unwrap();
    let (a, b) = (data.a_indices(), data.b_indices());
    let f = urysohn_separator(&space, &a, &b).unwrap();
    let endpoints = a.iter().all(|&p| f.value(p) == 0.0) && b.iter().all(|&p| f.value(p) == 1.0);
    let (q, _, fbar) = fiber_quotient(&space, &f, 16).unwrap();
    let qa: Vec<usize> = a.iter().map(|&p| q.partition.class_of(p)).collect();
    let qb: Vec<usize> = b.iter().map(|&p| q.partition.class_of(p)).collect();
    let disjoint = qa.iter().all(|c| !qb.contains(c));
    let hits = data
        .labels
        .iter()
        .enumerate()
        .filter(|&(p, &side)| {
            let v = fbar.value(q.partition.class_of(p));
            (if v > 0.5 { Side::B } else { Side::A }) == side
        })
        .count();
    let accuracy = hits as f64 / data.labels.len() as f64;
    let ok = linear <= 0.65 && endpoints && disjoint && accuracy == 1.0;
    report(
        4,
        "collapse separability",
        ok,
        &format!(
            "linear={linear:.3} quotient_points={} accuracy={accuracy}",
            q.space.len()
        ),
        t.elapsed(),
        Duration::from_secs(20),
    );
}

#[test]
fn ac5_recursive_separation_tower() {
    let t = Instant::now();
    let data = gen_spiral(100, 4.0, 0.05, 7).unwrap();
    let space = data.space().unwrap();
    // Inner halves of each arm, so the outer halves fill interior fibers.
    let a0: Vec<usize> = (0..50).collect();
    let b0: Vec<usize> = (100..150).collect();
    let tower = build_fiber_tower(&space, &a0, &b0, &[16, 8, 4, 2], 0.5).unwrap();
    let rep = recursive_separation_check(&tower, &a0, &b0).unwrap();
    let sizes: Vec<usize> = rep.levels.iter().map(|l| l.n_points).collect();

    let mut broken = tower.clone();
    let n2 = broken.levels[2].len();
    let qa = tower.lift(a0[0], 2).unwrap();
    let qb = tower.lift(b0[0], 2).unwrap();
    let mut labels: Vec<usize> = (0..n2).collect();
    labels[qb] = qa;
    broken.maps[2] = Partition::from_labels(&labels);
    let caught = matches!(
        recursive_separation_check(&broken, &a0, &b0),
        Err(Error::IncompatiblePartition { level: 2, .. })
    );
    let ok = rep.pass && rep.levels.len() == 5 && caught;
    report(
        5,
        "recursive separation",
        ok,
        &format!("level sizes={sizes:?} injected merge caught at level 2={caught}"),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn ac6_parity_stability() {
    let t = Instant::now();
    let mut ok = true;
    let mut worst_inner = 0.0f64;
    let mut min_inflation = f64::INFINITY;
    let mut worst_drift = 0.0f64;
    for seed in [1u64, 2, 3] {
        let run = alternating_phase_run(seed, 1000, 8, 8, 10, 1).unwrap();
        let audit = cross_interference_audit(&run.log, &run.state).unwrap();
        ok &= audit.pass && !audit.vacuous && run.r_changes_in_flow == 0;
        worst_inner = worst_inner.max(audit.max_abs);

        let tasks = conflicting_tasks(8, 4, seed).unwrap();
        let cfg = ForgettingConfig {
            metric_seed: Some(seed),
            ..Default::default()
        };
        let mono = forgetting_experiment(&tasks, Mode::Monolithic, &cfg).unwrap();
        let par = forgetting_experiment(&tasks, Mode::Parity, &cfg).unwrap();
        min_inflation = min_inflation.min(mono.inflation);
        let drift = (par.r_final - par.r_after_task0).abs();
        worst_drift = worst_drift.max(drift);
        ok &= mono.inflation >= 2.0 && drift == 0.0;
    }
    report(
        6,
        "parity stability",
        ok,
        &format!(
            "max |<flow,scaffold>|={worst_inner:e} min mono inflation={min_inflation:.3e} parity drift={worst_drift:e}"
        ),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn ac7_fast_inference_is_flat() {
    let t = Instant::now();
    let streams: Vec<Stream> = [10usize, 100, 1000]
        .iter()
        .map(|&r| gen_motif_stream(10, r, 0.0, 5).unwrap())
        .collect();
    let policy = CondensationPolicy::motif(10, 2, 0.07);
    let budget = 7;
    let rows = cost_scaling_report(&streams, &policy, 0.01, budget, 16).unwrap();
    let cand_ok = rows
        .iter()
        .all(|r| r.fast_cand_per_step_max <= budget as u64);
    let growth: Vec<f64> = rows
        .windows(2)
        .map(|w| w[1].slow_dist_evals as f64 / w[0].slow_dist_evals as f64)
        .collect();
    let ok = cand_ok && growth.iter().all(|&g| g >= 1.8);
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "L={} slow={} cand={} D={}",
                r.samples, r.slow_dist_evals, r.fast_cand_per_step_max, r.depth
            )
        })
        .collect();
    report(
        7,
        "fast vs slow inference",
        ok,
        &format!("{} growth={growth:.2?}", summary.join("; ")),
        t.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn ac8_noise_is_incompressible() {
    let t = Instant::now();
    let policy = CondensationPolicy::window(2, 0.01);
    let eps = 0.05;
    let budget = 7;
    let motif = gen_motif_stream(8, 32, 0.0, 8).unwrap();
    let hm = build_hierarchy(&motif, &policy, eps, budget, 64).unwrap();
    let n_motif = hm.covers[hm.depth()].size;
    let mut incompressible = 0;
    let mut ratio_ok = true;
    let mut noise_ns = Vec::new();
    for seed in [11u64, 12, 13] {
        let noise = gen_noise_stream(256, seed).unwrap();
        let h = build_hierarchy(&noise, &policy, eps, budget, 64).unwrap();
        if h.verdict == Verdict::Incompressible {
            incompressible += 1;
        }
        let n = h.covers[h.depth()].size;
        noise_ns.push(n);
        ratio_ok &= n >= 3 * n_motif;
    }
    let ok = incompressible >= 2 && ratio_ok;
    report(
        8,
        "noise control",
        ok,
        &format!("incompressible seeds={incompressible}/3 N_noise={noise_ns:?} N_motif={n_motif}"),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

fn random_space(n: usize, rng: &mut Rng) -> FiniteMetricSpace {
    // Shortest paths over a random weighted complete graph.
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.uniform_in(0.1, 1.0);
            d[i * n + j] = w;
            d[j * n + i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    FiniteMetricSpace::from_flat(n, d).unwrap()
}

#[test]
fn ac9_oracle_equivalence() {
    let t = Instant::now();
    let mut rng = Rng::new(2024);
    let mut max_err = 0.0f64;
    let mut cover_ok = true;
    let mut worst_ratio = 1.0f64;
    for _ in 0..50 {
        let n = 2 + rng.below(11);
        let space = random_space(n, &mut rng);
        let k = 1 + rng.below(n);
        let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let partition = Partition::from_labels(&labels);
        let q = build_quotient(&space, &partition).unwrap();
        for a in 0..n {
            for b in 0..n {
                let oracle = quotient_distance_oracle(&space, &partition, a, b).unwrap();
                let got = q
                    .space
                    .dist(q.partition.class_of(a), q.partition.class_of(b));
                max_err = max_err.max((oracle - got).abs());
            }
        }
        let eps = rng.uniform_in(0.1, 1.0);
        let exact = covering_number_exact(&space, eps).unwrap().size;
        let greedy = covering_number_greedy(&space, eps).unwrap().size;
        let ratio = greedy as f64 / exact as f64;
        worst_ratio = worst_ratio.max(ratio);
        cover_ok &= greedy >= exact && ratio <= 1.0 + (n as f64).ln();
    }
    let ok = max_err <= 1e-9 && cover_ok;
    report(
        9,
        "oracle equivalence",
        ok,
        &format!("max quotient error={max_err:e} worst greedy/exact={worst_ratio:.3}"),
        t.elapsed(),
        Duration::from_secs(60),
    );
}
