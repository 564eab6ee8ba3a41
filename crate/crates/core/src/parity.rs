//! Block-parity updates: a fast block that learns and a slow block that
//! stores, under a block-diagonal metric, so updates of opposite phase are
//! orthogonal and memory in the slow block is untouched by learning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Largest loss tolerated before a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Rejects matrices that are not exactly symmetric or fail Cholesky.
pub fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(format!(
            "{name} is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::NotPositiveDefinite(format!(
                    "{name} asymmetric at ({i}, {j})"
                )));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "{name} has no Cholesky factor"
        )));
    }
    Ok(())
}

/// `B B^T + dim I` with standard normal `B`.
pub fn random_spd(dim: usize, rng: &mut Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.normal());
    let m = &b * b.transpose() + DMatrix::identity(dim, dim) * dim as f64;
    // Symmetrize exactly; the product can differ in the last bit across the diagonal.
    DMatrix::from_fn(dim, dim, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] })
}

fn random_vector(dim: usize, rng: &mut Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.normal())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityState {
    pub theta_f: DVector<f64>,
    pub theta_s: DVector<f64>,
    g_f: DMatrix<f64>,
    g_s: DMatrix<f64>,
}

impl ParityState {
    pub fn new(
        theta_f: DVector<f64>,
        theta_s: DVector<f64>,
        g_f: DMatrix<f64>,
        g_s: DMatrix<f64>,
    ) -> Result<Self> {
        check_spd(&g_f, "G_F")?;
        check_spd(&g_s, "G_S")?;
        if g_f.nrows() != theta_f.len() {
            return Err(Error::DimensionMismatch {
                expected: g_f.nrows(),
                got: theta_f.len(),
            });
        }
        if g_s.nrows() != theta_s.len() {
            return Err(Error::DimensionMismatch {
                expected: g_s.nrows(),
                got: theta_s.len(),
            });
        }
        Ok(Self {
            theta_f,
            theta_s,
            g_f,
            g_s,
        })
    }

    pub fn identity(dim_f: usize, dim_s: usize) -> Self {
        Self {
            theta_f: DVector::zeros(dim_f),
            theta_s: DVector::zeros(dim_s),
            g_f: DMatrix::identity(dim_f, dim_f),
            g_s: DMatrix::identity(dim_s, dim_s),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.theta_f.len(), self.theta_s.len())
    }

    pub fn g_f(&self) -> &DMatrix<f64> {
        &self.g_f
    }

    pub fn g_s(&self) -> &DMatrix<f64> {
        &self.g_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Flow,
    Scaffold,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Flow => "flow",
            Phase::Scaffold => "scaffold",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseUpdate {
    pub phase: Phase,
    pub delta_f: DVector<f64>,
    pub delta_s: DVector<f64>,
    pub step_id: u64,
}

impl PhaseUpdate {
    pub fn flow(delta_f: DVector<f64>, dim_s: usize, step_id: u64) -> Self {
        Self {
            phase: Phase::Flow,
            delta_f,
            delta_s: DVector::zeros(dim_s),
            step_id,
        }
    }

    pub fn scaffold(delta_s: DVector<f64>, dim_f: usize, step_id: u64) -> Self {
        Self {
            phase: Phase::Scaffold,
            delta_f: DVector::zeros(dim_f),
            delta_s,
            step_id,
        }
    }
}

fn check_dims(state: &ParityState, u: &PhaseUpdate) -> Result<()> {
    let (nf, ns) = state.dims();
    if u.delta_f.len() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: u.delta_f.len(),
        });
    }
    if u.delta_s.len() != ns {
        return Err(Error::DimensionMismatch {
            expected: ns,
            got: u.delta_s.len(),
        });
    }
    Ok(())
}

/// `<u, v>_G = u_F^T G_F v_F + u_S^T G_S v_S`.
pub fn inner_product_g(state: &ParityState, u: &PhaseUpdate, v: &PhaseUpdate) -> Result<f64> {
    check_dims(state, u)?;
    check_dims(state, v)?;
    let f = u.delta_f.dot(&(&state.g_f * &v.delta_f));
    let s = u.delta_s.dot(&(&state.g_s * &v.delta_s));
    Ok(f + s)
}

/// Applies an update, refusing any nonzero entry in the block its phase freezes.
pub fn apply_phase(state: &ParityState, update: &PhaseUpdate) -> Result<ParityState> {
    check_dims(state, update)?;
    let frozen = match update.phase {
        Phase::Flow => &update.delta_s,
        Phase::Scaffold => &update.delta_f,
    };
    if let Some(index) = frozen.iter().position(|&x| x != 0.0) {
        return Err(Error::PhaseViolation {
            phase: update.phase.name(),
            index,
        });
    }
    let mut next = state.clone();
    match update.phase {
        Phase::Flow => next.theta_f += &update.delta_f,
        Phase::Scaffold => next.theta_s += &update.delta_s,
    }
    Ok(next)
}

/// `R(x) = 1/2 sum_a |x[support] - anchor_a|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryFunctional {
    pub anchors: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

impl MemoryFunctional {
    pub fn new(anchors: Vec<Vec<f64>>, support: Vec<usize>) -> Result<Self> {
        if let Some(a) = anchors.iter().find(|a| a.len() != support.len()) {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: a.len(),
            });
        }
        Ok(Self { anchors, support })
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut r = 0.0;
        for a in &self.anchors {
            for (k, &i) in self.support.iter().enumerate() {
                let d = x[i] - a[k];
                r += 0.5 * d * d;
            }
        }
        r
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for a in &self.anchors {
            for (k, &i) in self.support.iter().enumerate() {
                g[i] += x[i] - a[k];
            }
        }
        g
    }
}

/// Least squares on a subset of coordinates: `1/2 sum_k (x[coords_k] - target_k)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqTask {
    pub coords: Vec<usize>,
    pub target: Vec<f64>,
}

impl LsqTask {
    pub fn new(coords: Vec<usize>, target: Vec<f64>) -> Result<Self> {
        if coords.len() != target.len() || coords.is_empty() {
            return Err(Error::InvalidTask(format!(
                "{} coordinates for {} targets",
                coords.len(),
                target.len()
            )));
        }
        Ok(Self { coords, target })
    }

    /// Loss read off `x` with the task's coordinates offset by `offset`.
    pub fn loss_at(&self, x: &DVector<f64>, offset: usize) -> f64 {
        self.coords
            .iter()
            .zip(&self.target)
            .map(|(&c, &t)| 0.5 * (x[offset + c] - t).powi(2))
            .sum()
    }

    pub fn loss(&self, x: &DVector<f64>) -> f64 {
        self.loss_at(x, 0)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for (&c, &t) in self.coords.iter().zip(&self.target) {
            g[c] = x[c] - t;
        }
        g
    }

    fn max_coord(&self) -> usize {
        self.coords.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub flow_updates: usize,
    pub scaffold_updates: usize,
    pub pairs: usize,
    pub max_abs: f64,
    /// True when one phase never occurred, so nothing was compared.
    pub vacuous: bool,
    pub pass: bool,
}

/// Inner product of every flow update with every scaffold update in `log`.
pub fn cross_interference_audit(log: &[PhaseUpdate], state: &ParityState) -> Result<AuditReport> {
    let flows: Vec<&PhaseUpdate> = log.iter().filter(|u| u.phase == Phase::Flow).collect();
    let scaffolds: Vec<&PhaseUpdate> = log.iter().filter(|u| u.phase == Phase::Scaffold).collect();
    let mut max_abs = 0.0f64;
    for u in &flows {
        for v in &scaffolds {
            max_abs = max_abs.max(inner_product_g(state, u, v)?.abs());
        }
    }
    Ok(AuditReport {
        flow_updates: flows.len(),
        scaffold_updates: scaffolds.len(),
        pairs: flows.len() * scaffolds.len(),
        max_abs,
        vacuous: flows.is_empty() || scaffolds.is_empty(),
        pass: max_abs == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Parity,
    Monolithic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingConfig {
    pub lr: f64,
    /// Flow-phase gradient steps per task.
    pub steps_per_task: usize,
    pub flow_len: usize,
    pub scaffold_len: usize,
    pub dim_f: usize,
    /// Draw random SPD metrics from this seed; identity metrics when `None`.
    pub metric_seed: Option<u64>,
    /// Off-diagonal coupling between the blocks. Only 0 is supported.
    pub cross_coupling: f64,
}

impl Default for ForgettingConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            steps_per_task: 200,
            flow_len: 10,
            scaffold_len: 1,
            dim_f: 8,
            metric_seed: None,
            cross_coupling: 0.0,
        }
    }
}

impl ForgettingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| {
            Err(Error::Config {
                field: field.into(),
                msg: msg.into(),
            })
        };
        if self.cross_coupling != 0.0 {
            return bad(
                "cross_coupling",
                "block coupling is not supported; must be 0",
            );
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if self.flow_len == 0
            || self.scaffold_len == 0
            || self.steps_per_task == 0
            || self.dim_f == 0
        {
            return bad(
                "flow_len",
                "phase lengths, steps and dimension must be positive",
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub phase: &'static str,
    pub task_id: usize,
    pub task0_loss: f64,
    pub current_loss: f64,
    pub r_value: f64,
    pub r_drift: f64,
}

pub const METRICS_CSV_HEADER: &str = "step,phase,task_id,task0_loss,current_loss,R_value,R_drift";

impl MetricsRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.step,
            self.phase,
            self.task_id,
            self.task0_loss,
            self.current_loss,
            self.r_value,
            self.r_drift
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingRun {
    pub mode: Mode,
    pub rows: Vec<MetricsRow>,
    /// Task-0 loss right after training on task 0.
    pub task0_after_own: f64,
    pub task0_final: f64,
    /// `task0_final / task0_after_own`.
    pub inflation: f64,
    pub r_after_task0: f64,
    pub r_final: f64,
    /// Largest |<u, v>_G| between an update made for a later task and one made for task 0.
    pub max_cross_task_interference: f64,
    /// Fast-block (parity) or leading-block (monolithic) parameters at the end.
    pub final_fast: DVector<f64>,
}

struct Recorder {
    rows: Vec<MetricsRow>,
    last_r: f64,
}

impl Recorder {
    fn record(
        &mut self,
        phase: &'static str,
        task_id: usize,
        task0_loss: f64,
        current_loss: f64,
        r: f64,
    ) -> Result<()> {
        for l in [task0_loss, current_loss] {
            if !l.is_finite() || l > DIVERGENCE_LIMIT {
                return Err(Error::Divergence(l));
            }
        }
        self.rows.push(MetricsRow {
            step: self.rows.len(),
            phase,
            task_id,
            task0_loss,
            current_loss,
            r_value: r,
            r_drift: r - self.last_r,
        });
        self.last_r = r;
        Ok(())
    }
}

/// Trains `tasks` in sequence and tracks how much task 0 is forgotten.
///
/// Both modes take the same plain gradient steps on the fast coordinates. In
/// parity mode each flow phase is followed by a scaffold phase that writes the
/// mean of the phase's fast iterates into the current task's slot of the slow
/// block; task-0 loss and R are read from slot 0. In monolithic mode the
/// parameters form one vector under a dense metric and both are read from the
/// working coordinates.
pub fn forgetting_experiment(
    tasks: &[LsqTask],
    mode: Mode,
    cfg: &ForgettingConfig,
) -> Result<ForgettingRun> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidTask("no tasks".into()));
    }
    let dim_f = cfg.dim_f;
    if let Some(t) = tasks.iter().find(|t| t.max_coord() >= dim_f) {
        return Err(Error::InvalidTask(format!(
            "coordinate {} outside dim_f {dim_f}",
            t.max_coord()
        )));
    }
    let dim_s = tasks.len() * dim_f;
    let mut rng = cfg.metric_seed.map(Rng::new);
    let mut spd = |d: usize| match rng.as_mut() {
        Some(r) => random_spd(d, r),
        None => DMatrix::identity(d, d),
    };
    let memory = MemoryFunctional::new(vec![tasks[0].target.clone()], tasks[0].coords.clone())?;
    let mut rec = Recorder {
        rows: Vec::new(),
        last_r: 0.0,
    };
    let mut task0_updates: Vec<DVector<f64>> = Vec::new();
    let mut later_updates: Vec<DVector<f64>> = Vec::new();
    let mut task0_after_own = 0.0;
    let mut r_after_task0 = 0.0;

    let (final_fast, g_full) = match mode {
        Mode::Parity => {
            let g_f = spd(dim_f);
            let g_s = spd(dim_s);
            let mut state =
                ParityState::new(DVector::zeros(dim_f), DVector::zeros(dim_s), g_f, g_s)?;
            let slot0 = |s: &ParityState| s.theta_s.rows(0, dim_f).into_owned();
            rec.last_r = memory.value(&slot0(&state));
            let mut step_id = 0u64;
            for (t, task) in tasks.iter().enumerate() {
                let mut remaining = cfg.steps_per_task;
                while remaining > 0 {
                    let mut sum = DVector::zeros(dim_f);
                    let len = cfg.flow_len.min(remaining);
                    for _ in 0..len {
                        let delta = -cfg.lr * task.gradient(&state.theta_f);
                        let upd = PhaseUpdate::flow(delta, dim_s, step_id);
                        step_id += 1;
                        state = apply_phase(&state, &upd)?;
                        sum += &state.theta_f;
                        let s0 = slot0(&state);
                        rec.record(
                            "flow",
                            t,
                            tasks[0].loss(&s0),
                            task.loss(&state.theta_f),
                            memory.value(&s0),
                        )?;
                        let full = stack(&upd.delta_f, &upd.delta_s);
                        if t == 0 {
                            task0_updates.push(full)
                        } else {
                            later_updates.push(full)
                        }
                    }
                    remaining -= len;
                    let mean = sum / len as f64;
                    for _ in 0..cfg.scaffold_len {
                        let mut delta = DVector::zeros(dim_s);
                        for i in 0..dim_f {
                            delta[t * dim_f + i] = mean[i] - state.theta_s[t * dim_f + i];
                        }
                        let upd = PhaseUpdate::scaffold(delta, dim_f, step_id);
                        step_id += 1;
                        state = apply_phase(&state, &upd)?;
                        let s0 = slot0(&state);
                        rec.record(
                            "scaffold",
                            t,
                            tasks[0].loss(&s0),
                            task.loss(&state.theta_f),
                            memory.value(&s0),
                        )?;
                        let full = stack(&upd.delta_f, &upd.delta_s);
                        if t == 0 {
                            task0_updates.push(full)
                        } else {
                            later_updates.push(full)
                        }
                    }
                }
                if t == 0 {
                    task0_after_own = tasks[0].loss(&slot0(&state));
                    r_after_task0 = rec.last_r;
                }
            }
            let g = block_diag(state.g_f(), state.g_s());
            (state.theta_f.clone(), g)
        }
        Mode::Monolithic => {
            let dim = dim_f + dim_s;
            let g = spd(dim);
            check_spd(&g, "G")?;
            let mut theta = DVector::zeros(dim);
            rec.last_r = memory.value(&theta);
            for (t, task) in tasks.iter().enumerate() {
                for _ in 0..cfg.steps_per_task {
                    let delta = -cfg.lr * task.gradient(&theta);
                    theta += &delta;
                    rec.record(
                        "mono",
                        t,
                        tasks[0].loss(&theta),
                        task.loss(&theta),
                        memory.value(&theta),
                    )?;
                    if t == 0 {
                        task0_updates.push(delta)
                    } else {
                        later_updates.push(delta)
                    }
                }
                if t == 0 {
                    task0_after_own = tasks[0].loss(&theta);
                    r_after_task0 = rec.last_r;
                }
            }
            (theta.rows(0, dim_f).into_owned(), g)
        }
    };

    let mut max_cross = 0.0f64;
    for u in &later_updates {
        let gu = &g_full * u;
        for v in &task0_updates {
            max_cross = max_cross.max(gu.dot(v).abs());
        }
    }
    let task0_final = rec.rows.last().map_or(task0_after_own, |r| r.task0_loss);
    let r_final = rec.last_r;
    Ok(ForgettingRun {
        mode,
        rows: rec.rows,
        task0_after_own,
        task0_final,
        inflation: task0_final / task0_after_own,
        r_after_task0,
        r_final,
        max_cross_task_interference: max_cross,
        final_fast,
    })
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(na + nb, na + nb);
    m.view_mut((0, 0), (na, na)).copy_from(a);
    m.view_mut((na, na), (nb, nb)).copy_from(b);
    m
}

/// Two tasks pulling the same coordinates toward opposite targets.
pub fn conflicting_tasks(dim_f: usize, n_coords: usize, seed: u64) -> Result<Vec<LsqTask>> {
    if n_coords == 0 || n_coords > dim_f {
        return Err(Error::InvalidTask(format!(
            "{n_coords} coordinates in dimension {dim_f}"
        )));
    }
    let mut rng = Rng::new(seed);
    let coords: Vec<usize> = (0..n_coords).collect();
    let t0: Vec<f64> = (0..n_coords)
        .map(|_| {
            let m = rng.uniform_in(0.5, 1.5);
            if rng.uniform() < 0.5 {
                -m
            } else {
                m
            }
        })
        .collect();
    let t1 = t0.iter().map(|v| -v).collect();
    Ok(vec![
        LsqTask::new(coords.clone(), t0)?,
        LsqTask::new(coords, t1)?,
    ])
}

/// Outcome of a random alternating phase schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRun {
    pub log: Vec<PhaseUpdate>,
    pub state: ParityState,
    /// R evaluated on the slow block before the first update and after each one.
    pub r_trace: Vec<f64>,
    /// Flow updates after which R changed in any bit.
    pub r_changes_in_flow: usize,
}

/// `n_updates` random updates in repeating cycles of `flow_len` flow then
/// `scaffold_len` scaffold steps, under random SPD block metrics.
pub fn alternating_phase_run(
    seed: u64,
    n_updates: usize,
    dim_f: usize,
    dim_s: usize,
    flow_len: usize,
    scaffold_len: usize,
) -> Result<PhaseRun> {
    if flow_len == 0 || scaffold_len == 0 {
        return Err(Error::Config {
            field: "flow_len".into(),
            msg: "phase lengths must be positive".into(),
        });
    }
    let mut rng = Rng::new(seed);
    let g_f = random_spd(dim_f, &mut rng);
    let g_s = random_spd(dim_s, &mut rng);
    let mut state = ParityState::new(
        random_vector(dim_f, &mut rng),
        random_vector(dim_s, &mut rng),
        g_f,
        g_s,
    )?;
    let anchors = (0..3)
        .map(|_| (0..dim_s).map(|_| rng.normal()).collect())
        .collect();
    let memory = MemoryFunctional::new(anchors, (0..dim_s).collect())?;
    let cycle = flow_len + scaffold_len;
    let mut log = Vec::with_capacity(n_updates);
    let mut r_trace = vec![memory.value(&state.theta_s)];
    let mut r_changes_in_flow = 0;
    for step in 0..n_updates {
        let upd = if step % cycle < flow_len {
            PhaseUpdate::flow(0.01 * random_vector(dim_f, &mut rng), dim_s, step as u64)
        } else {
            PhaseUpdate::scaffold(0.01 * random_vector(dim_s, &mut rng), dim_f, step as u64)
        };
        state = apply_phase(&state, &upd)?;
        let r = memory.value(&state.theta_s);
        if upd.phase == Phase::Flow && r.to_bits() != r_trace.last().unwrap().to_bits() {
            r_changes_in_flow += 1;
        }
        r_trace.push(r);
        log.push(upd);
    }
    Ok(PhaseRun {
        log,
        state,
        r_trace,
        r_changes_in_flow,
    })
}
