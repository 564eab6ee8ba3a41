//! Config-driven experiments that write CSV (and optionally SVG) outputs plus
//! a SHA-256 manifest, and check their own pass conditions.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::cover::segment_capacity_curve;
use crate::datasets::{gen_motif_stream, gen_noise_stream, gen_spiral};
use crate::error::Result;
use crate::hierarchy::{
    build_hierarchy, depth_vs_length_experiment, verify_telescoping, Stream, Verdict,
    DEPTH_CSV_HEADER, HIERARCHY_CSV_HEADER,
};
use crate::inference::{cost_scaling_report, SCALING_CSV_HEADER};
use crate::io::{write_atomic, write_manifest};
use crate::metric::Metric;
use crate::parity::{
    alternating_phase_run, conflicting_tasks, cross_interference_audit, forgetting_experiment,
    ForgettingConfig, Mode, METRICS_CSV_HEADER,
};
use crate::quotient::TOKEN_CSV_HEADER;
use crate::separator::{
    build_fiber_tower, fiber_quotient, linear_baseline_accuracy, recursive_separation_check,
    urysohn_separator, Side, SEPARATION_CSV_HEADER, SEPARATOR_CSV_HEADER,
};
use crate::svg::{line_plot, scatter_plot, Series};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Failed pass conditions, empty when the run passed.
    pub failures: Vec<String>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
    failures: Vec<String>,
}

impl Writer<'_> {
    fn csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> Result<()> {
        let mut body = format!("{header}\n");
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        self.file(name, &body)
    }

    fn file(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

/// Runs the configured experiment, writing outputs into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
        failures: Vec::new(),
    };
    match cfg.kind {
        ExperimentKind::Capacity => capacity(cfg, &mut w)?,
        ExperimentKind::Collapse => collapse(cfg, &mut w)?,
        ExperimentKind::Parity => parity(cfg, &mut w)?,
        ExperimentKind::Scaling => scaling(cfg, &mut w)?,
        ExperimentKind::Depth => depth(cfg, &mut w)?,
    }
    let manifest = write_manifest(out_dir, &w.files)?;
    Ok(ExperimentOutcome {
        kind: cfg.kind,
        files: w.files,
        manifest,
        failures: w.failures,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn capacity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let lengths: Vec<f64> = cfg.get_list("lengths")?;
    let eps = cfg.positive("epsilon")?;
    let h = cfg.positive("resolution")?;
    let curve = segment_capacity_curve(&lengths, eps, h)?;
    let rows = curve
        .iter()
        .map(|&(l, n)| format!("{l},{eps},{n},{}", (l / (2.0 * eps)).ceil()));
    w.csv("capacity_curve.csv", "L,epsilon,N,ceil_L_over_2eps", rows)?;
    for &(l, n) in &curve {
        let expected = (l / (2.0 * eps)).ceil();
        w.check((n as f64 - expected).abs() <= 1.0, || {
            format!("L={l}: N={n}, expected {expected} +- 1")
        });
    }
    if curve.len() >= 2 {
        let ns: Vec<f64> = curve.iter().map(|&(_, n)| n as f64).collect();
        let s = slope(&lengths, &ns) * 2.0 * eps;
        w.check((0.8..=1.2).contains(&s), || {
            format!("normalized slope {s:.3} outside [0.8, 1.2]")
        });
    }
    if cfg.emit_svg()? {
        let pts = curve.iter().map(|&(l, n)| (l, n as f64)).collect();
        let svg = line_plot(
            "Covering number of a segment",
            "L",
            "N_eps",
            &[Series {
                label: "N_eps",
                points: pts,
            }],
        );
        w.file("capacity_curve.svg", &svg)?;
    }
    Ok(())
}

fn collapse(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let data = gen_spiral(
        cfg.count("n_per_class")?,
        cfg.positive("turns")?,
        cfg.get("noise_sigma")?,
        cfg.seed()?,
    )?;
    let space = data.space()?;
    let (a, b) = (data.a_indices(), data.b_indices());
    let f = urysohn_separator(&space, &a, &b)?;
    w.csv(
        "separator.csv",
        SEPARATOR_CSV_HEADER,
        (0..space.len()).map(|p| {
            let set = match data.labels[p] {
                Side::A => "A",
                Side::B => "B",
            };
            format!("{},{},{set}", space.id(p), f.value(p))
        }),
    )?;
    let linear = linear_baseline_accuracy(
        &data.points,
        &data.labels,
        cfg.count("directions")?,
        cfg.seed()?,
    );
    let (q, _, fbar) = fiber_quotient(&space, &f, cfg.count("n_bins")?)?;
    let hits = data
        .labels
        .iter()
        .enumerate()
        .filter(|&(p, &s)| (fbar.value(q.partition.class_of(p)) > 0.5) == (s == Side::B))
        .count();
    let accuracy = hits as f64 / data.labels.len() as f64;
    w.csv(
        "collapse_summary.csv",
        "linear_accuracy,quotient_points,quotient_accuracy",
        [format!("{linear},{},{accuracy}", q.space.len())],
    )?;
    w.check(accuracy == 1.0, || {
        format!("quotient accuracy {accuracy} below 1")
    });

    let frac = cfg.positive("inner_fraction")?.min(1.0);
    let k = ((data.n_per_class as f64 * frac).round() as usize).max(1);
    let a0: Vec<usize> = a[..k].to_vec();
    let b0: Vec<usize> = b[..k].to_vec();
    let tower = build_fiber_tower(
        &space,
        &a0,
        &b0,
        &cfg.get_list("tower_bins")?,
        cfg.positive("epsilon")?,
    )?;
    let report = recursive_separation_check(&tower, &a0, &b0)?;
    w.csv(
        "separation_report.csv",
        SEPARATION_CSV_HEADER,
        report.levels.iter().map(|l| l.csv_row()),
    )?;
    w.check(report.pass, || "recursive separation failed".into());

    if cfg.emit_svg()? {
        let series: Vec<Series> = [(Side::A, "A"), (Side::B, "B")]
            .into_iter()
            .map(|(side, label)| Series {
                label,
                points: data
                    .points
                    .iter()
                    .zip(&data.labels)
                    .filter(|(_, &s)| s == side)
                    .map(|(p, _)| (p[0], p[1]))
                    .collect(),
            })
            .collect();
        w.file(
            "spiral.svg",
            &scatter_plot("Interleaved spirals", "x", "y", &series),
        )?;
        let fvals = Series {
            label: "f",
            points: data
                .points
                .iter()
                .enumerate()
                .map(|(p, pt)| (pt[0].hypot(pt[1]), f.value(p)))
                .collect(),
        };
        w.file(
            "separator.svg",
            &scatter_plot("Separator by radius", "radius", "f", &[fvals]),
        )?;
    }
    Ok(())
}

fn parity(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let seed = cfg.seed()?;
    let (flow_len, scaffold_len) = (cfg.count("flow_len")?, cfg.count("scaffold_len")?);
    let run = alternating_phase_run(
        seed,
        cfg.count("n_updates")?,
        cfg.count("dim_f")?,
        cfg.count("dim_s")?,
        flow_len,
        scaffold_len,
    )?;
    let audit = cross_interference_audit(&run.log, &run.state)?;
    w.csv(
        "parity_audit.csv",
        "seed,flow_updates,scaffold_updates,pairs,max_abs,r_changes_in_flow,pass",
        [format!(
            "{seed},{},{},{},{},{},{}",
            audit.flow_updates,
            audit.scaffold_updates,
            audit.pairs,
            audit.max_abs,
            run.r_changes_in_flow,
            audit.pass && run.r_changes_in_flow == 0
        )],
    )?;
    w.check(audit.pass, || {
        format!("cross-phase inner product {:e}", audit.max_abs)
    });
    w.check(run.r_changes_in_flow == 0, || {
        format!("R changed during {} flow updates", run.r_changes_in_flow)
    });

    let dim_f = cfg.count("dim_f")?;
    let tasks = conflicting_tasks(dim_f, cfg.count("task_coords")?, seed)?;
    let fcfg = ForgettingConfig {
        lr: cfg.positive("lr")?,
        steps_per_task: cfg.count("steps_per_task")?,
        flow_len,
        scaffold_len,
        dim_f,
        metric_seed: (cfg.get::<String>("metric")? == "random").then_some(seed),
        cross_coupling: cfg.get("cross_coupling")?,
    };
    let par = forgetting_experiment(&tasks, Mode::Parity, &fcfg)?;
    let mono = forgetting_experiment(&tasks, Mode::Monolithic, &fcfg)?;
    w.csv(
        "parity_metrics.csv",
        METRICS_CSV_HEADER,
        par.rows.iter().map(|r| r.csv_row()),
    )?;
    w.csv(
        "monolithic_metrics.csv",
        METRICS_CSV_HEADER,
        mono.rows.iter().map(|r| r.csv_row()),
    )?;
    let drift = par.r_final - par.r_after_task0;
    w.check(drift == 0.0, || {
        format!("parity-mode task-0 drift {drift:e}")
    });
    w.check(mono.inflation >= 2.0, || {
        format!("monolithic task-0 inflation {:.3} below 2", mono.inflation)
    });

    if cfg.emit_svg()? {
        let curve = |rows: &[crate::parity::MetricsRow]| {
            rows.iter()
                .map(|r| (r.step as f64, (r.task0_loss + 1e-12).log10()))
                .collect()
        };
        let svg = line_plot(
            "Task-0 loss during sequential training",
            "step",
            "log10 task-0 loss",
            &[
                Series {
                    label: "parity",
                    points: curve(&par.rows),
                },
                Series {
                    label: "monolithic",
                    points: curve(&mono.rows),
                },
            ],
        );
        w.file("forgetting.svg", &svg)?;
    }
    Ok(())
}

fn motif_streams(cfg: &ExperimentConfig) -> Result<Vec<Stream>> {
    let m = cfg.count("stream_motif_len")?;
    let jitter: f64 = cfg.get("jitter")?;
    let seed = cfg.seed()?;
    cfg.get_list::<usize>("sample_counts")?
        .into_iter()
        .map(|l| gen_motif_stream(m, l.div_ceil(m), jitter, seed))
        .collect()
}

fn scaling(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let streams = motif_streams(cfg)?;
    let budget = cfg.count("budget")?;
    let rows = cost_scaling_report(
        &streams,
        &cfg.policy()?,
        cfg.positive("epsilon")?,
        budget,
        cfg.count("max_depth")?,
    )?;
    w.csv(
        "scaling.csv",
        SCALING_CSV_HEADER,
        rows.iter().map(|r| r.csv_row()),
    )?;
    for r in &rows {
        w.check(r.fast_cand_per_step_max <= budget as u64, || {
            format!(
                "L={}: {} candidates per step exceed budget {budget}",
                r.samples, r.fast_cand_per_step_max
            )
        });
    }
    for pair in rows.windows(2) {
        let decades = (pair[1].samples as f64 / pair[0].samples as f64).log10();
        if decades > 0.0 {
            let per_decade = (pair[1].slow_dist_evals as f64 / pair[0].slow_dist_evals as f64)
                .powf(1.0 / decades);
            w.check(per_decade >= 1.8, || {
                format!("slow cost grew {per_decade:.2}x per decade")
            });
        }
    }
    if cfg.emit_svg()? {
        let slow = rows
            .iter()
            .map(|r| {
                (
                    (r.samples as f64).log10(),
                    (r.slow_dist_evals as f64).log10(),
                )
            })
            .collect();
        let fast = rows
            .iter()
            .map(|r| {
                (
                    (r.samples as f64).log10(),
                    (r.fast_cand_per_step_max.max(1) as f64).log10(),
                )
            })
            .collect();
        let svg = line_plot(
            "Inference cost",
            "log10 samples",
            "log10 cost",
            &[
                Series {
                    label: "slow distance evals",
                    points: slow,
                },
                Series {
                    label: "fast candidates/step",
                    points: fast,
                },
            ],
        );
        w.file("scaling.svg", &svg)?;
    }
    Ok(())
}

fn depth(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let streams = motif_streams(cfg)?;
    let policy = cfg.policy()?;
    let eps = cfg.positive("epsilon")?;
    let budget = cfg.count("budget")?;
    let rho = cfg.positive("rho")?;
    let max_depth = cfg.count("max_depth")?;
    let rows = depth_vs_length_experiment(&streams, &policy, eps, budget, rho, max_depth)?;
    w.csv(
        "depth_vs_length.csv",
        DEPTH_CSV_HEADER,
        rows.iter().map(|r| r.csv_row()),
    )?;
    for pair in rows.windows(2) {
        w.check(pair[1].depth >= pair[0].depth, || {
            format!(
                "depth fell from L={} to L={}",
                pair[0].samples, pair[1].samples
            )
        });
    }

    let largest = streams.last().expect("sample_counts is non-empty");
    let h = build_hierarchy(largest, &policy, eps, budget, max_depth)?;
    let tel = verify_telescoping(&h, rho)?;
    w.check(tel.pass, || {
        format!(
            "telescoping at rho={rho} failed at step {:?}",
            tel.first_violation
        )
    });
    w.csv(
        "hierarchy_report.csv",
        HIERARCHY_CSV_HEADER,
        h.report_rows(),
    )?;
    w.csv(
        "token_log.csv",
        TOKEN_CSV_HEADER,
        h.tokens.iter().flat_map(|t| t.csv_rows()),
    )?;

    let noise_eps = cfg.positive("noise_epsilon")?;
    let noise_budget = cfg.count("noise_budget")?;
    let motif = gen_motif_stream(
        cfg.count("stream_motif_len")?,
        cfg.count("noise_n")?
            .div_ceil(cfg.count("stream_motif_len")?),
        0.0,
        cfg.seed()?,
    )?;
    let hm = build_hierarchy(&motif, &policy, noise_eps, noise_budget, max_depth)?;
    let n_motif = hm.covers[hm.depth()].size;
    let mut noise_rows = Vec::new();
    let mut incompressible = 0;
    let n_seeds = cfg.count("noise_seeds")?;
    for s in 0..n_seeds as u64 {
        let seed = cfg.seed()? + s;
        let noise = gen_noise_stream(cfg.count("noise_n")?, seed)?;
        let hn = build_hierarchy(&noise, &policy, noise_eps, noise_budget, max_depth)?;
        if hn.verdict == Verdict::Incompressible {
            incompressible += 1;
        }
        noise_rows.push(format!(
            "{seed},{},{},{},{},{},{n_motif}",
            noise.n_samples(),
            policy.diameter_cap,
            hn.verdict,
            hn.depth(),
            hn.covers[hn.depth()].size
        ));
    }
    w.csv(
        "noise_control.csv",
        "seed,n,delta,verdict,depth,N_noise,N_motif",
        noise_rows,
    )?;
    w.check(2 * incompressible > n_seeds, || {
        format!("noise incompressible on only {incompressible}/{n_seeds} seeds")
    });

    if cfg.emit_svg()? {
        let achieved = rows
            .iter()
            .map(|r| ((r.samples as f64).log2(), r.depth as f64))
            .collect();
        let formula = rows
            .iter()
            .map(|r| ((r.samples as f64).log2(), r.formula as f64))
            .collect();
        let svg = line_plot(
            "Depth against stream length",
            "log2 L",
            "depth",
            &[
                Series {
                    label: "achieved",
                    points: achieved,
                },
                Series {
                    label: "formula",
                    points: formula,
                },
            ],
        );
        w.file("depth_vs_length.svg", &svg)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_experiment_passes_with_defaults() {
        for kind in [
            ExperimentKind::Capacity,
            ExperimentKind::Collapse,
            ExperimentKind::Parity,
            ExperimentKind::Depth,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = ExperimentConfig::new(kind);
            cfg.set("emit_svg", "true").unwrap();
            let out = run_experiment(&cfg, dir.path()).unwrap();
            assert!(out.passed(), "{kind}: {:?}", out.failures);
            let manifest = fs::read_to_string(&out.manifest).unwrap();
            assert_eq!(manifest.lines().count(), out.files.len());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ExperimentConfig::new(ExperimentKind::Parity);
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m1 = fs::read_to_string(run_experiment(&cfg, d1.path()).unwrap().manifest).unwrap();
        let m2 = fs::read_to_string(run_experiment(&cfg, d2.path()).unwrap().manifest).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn failed_condition_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Capacity);
        cfg.set("resolution", "0.3").unwrap();
        assert!(run_experiment(&cfg, dir.path()).is_err());
        let mut cfg = ExperimentConfig::new(ExperimentKind::Parity);
        cfg.set("steps_per_task", "1").unwrap();
        let out = run_experiment(&cfg, dir.path()).unwrap();
        assert!(!out.passed());
    }
}
