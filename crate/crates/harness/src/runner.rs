//! Task execution and persistence.
//!
//! Output directory layout:
//!
//! ```text
//! rows.jsonl     one ResultRow per (cell, instance, stage), task order
//! spectra.jsonl  one SpectrumRecord per stored Hessian spectrum
//! summary.csv    scalar columns of rows.jsonl
//! manifest.json  config, code version, completed tasks, byte offsets,
//!                timestamps
//! ```
//!
//! Workers finish tasks in any order; a single writer holds results back
//! until every earlier task is written, so the files only depend on the
//! config. After each task the manifest records the byte length of both
//! files. Resuming truncates them to those lengths, which discards a
//! partially written task, and runs only the tasks not yet recorded.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vqa_core::circuit::{CircuitSpec, ParameterVector};
use vqa_core::deriv::{self, Workspace};
use vqa_core::entropy::{renyi_entropy, Bipartition};
use vqa_core::hamiltonian::IsingModel;
use vqa_core::optimizer::{self, Snapshot};
use vqa_core::rng::derive_seed;
use vqa_core::spectral::{landscape_metrics, HessianReport, THETA_LARGE_INIT, THETA_SMALL};
use vqa_core::state::StateVector;

use crate::config::{Cell, ExperimentConfig, ExperimentKind, Task};
use crate::error::HarnessError;

pub const ROWS_FILE: &str = "rows.jsonl";
pub const SPECTRA_FILE: &str = "spectra.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renyi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_to_success: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_norm: Option<f64>,
    /// ∂_a𝓛 for qubit 0 of the middle layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_fixed: Option<f64>,
    /// ‖∇𝓛‖² / nL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_sq_mean: Option<f64>,
    /// Σ_α ρ_αα².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_top: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bottom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frac_small: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frac_large: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_small: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_large: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_large: Option<f64>,
}

impl Metrics {
    fn add_spectrum(&mut self, r: &HessianReport) {
        self.h_top = Some(r.h_top);
        self.h_bottom = Some(r.h_bottom);
        self.frac_small = Some(r.frac_small);
        self.frac_large = Some(r.frac_large);
        self.overlap_small = r.overlap_small;
        self.overlap_large = r.overlap_large;
        self.theta_large = Some(r.theta_large);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: usize,
    pub p: f64,
    pub l: usize,
    pub l_pad: usize,
    pub instance: usize,
    pub seed: u64,
    pub stage: usize,
    pub metrics: Metrics,
    /// Id of the matching line in spectra.jsonl.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub id: String,
    pub cell: usize,
    pub instance: usize,
    pub stage: usize,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TaskOutput {
    pub rows: Vec<ResultRow>,
    pub spectra: Vec<SpectrumRecord>,
}

/// Shared read-only state for task execution.
pub struct Context {
    pub config: ExperimentConfig,
    pub cells: Vec<Cell>,
    pub model: IsingModel,
    pub ground_energy: Option<f64>,
}

impl Context {
    pub fn new(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let model = IsingModel::from_params(config.model_params())?;
        let ground_energy = if config.needs_ground_energy() { Some(model.ground_energy()?) } else { None };
        Ok(Context { config: config.clone(), cells: config.cells(), model, ground_energy })
    }
}

fn spectrum_id(task: &Task, stage: usize) -> String {
    format!("c{}-i{}-t{}", task.cell, task.instance, stage)
}

/// Circuit and initial angles of a task.
pub fn task_instance(
    cfg: &ExperimentConfig,
    cell: &Cell,
    task: &Task,
) -> Result<(CircuitSpec, ParameterVector), HarnessError> {
    let spec = CircuitSpec::build(cfg.n, cfg.l_ent, cell.l_pad, cell.p, derive_seed(task.seed, &[0]))?;
    let theta = ParameterVector::uniform(spec.n_params(), derive_seed(task.seed, &[1]));
    Ok((spec, theta))
}

pub fn execute(ctx: &Context, task: &Task) -> Result<TaskOutput, HarnessError> {
    let cfg = &ctx.config;
    let cell = &ctx.cells[task.cell];
    let (spec, theta) = task_instance(cfg, cell, task)?;
    let row = |stage: usize, metrics: Metrics, spectrum: Option<String>| ResultRow {
        cell: cell.index,
        p: cell.p,
        l: cell.l,
        l_pad: cell.l_pad,
        instance: task.instance,
        seed: task.seed,
        stage,
        metrics,
        spectrum,
    };
    let mut out = TaskOutput::default();
    match cfg.kind {
        ExperimentKind::MomentSweep => {
            let mut ws = Workspace::new(cfg.n);
            let mut g = vec![0.0; spec.n_params()];
            let energy = ws.energy_and_gradient(&spec, &ctx.model, &theta, &mut g)?;
            let state = StateVector::from_amplitudes(cfg.n, ws.state().to_vec())?;
            let part = Bipartition::new(cfg.n, cfg.entropy.subsystem.unwrap_or(cfg.n / 2))?;
            let metrics = Metrics {
                energy,
                renyi: Some(renyi_entropy(&state, &part, cfg.entropy.order)?),
                grad_fixed: Some(g[(cell.l / 2) * cfg.n]),
                grad_sq_mean: Some(g.iter().map(|x| x * x).sum::<f64>() / g.len() as f64),
                diag_sq: Some(state.amplitudes().iter().map(|a| a.powi(4)).sum()),
                grad_norm: Some(g.iter().map(|x| x * x).sum::<f64>().sqrt()),
                ..Default::default()
            };
            out.rows.push(row(0, metrics, None));
        }
        ExperimentKind::HessianInit => {
            let mut ws = Workspace::new(cfg.n);
            let mut g = vec![0.0; spec.n_params()];
            let energy = ws.energy_and_gradient(&spec, &ctx.model, &theta, &mut g)?;
            let mut metrics =
                Metrics { energy, grad_norm: Some(g.iter().map(|x| x * x).sum::<f64>().sqrt()), ..Default::default() };
            let mut id = None;
            if cfg.wants_hessian(task.instance) {
                let h = deriv::hessian_adjoint(&spec, &ctx.model, &theta)?;
                let report = landscape_metrics(&h, &g, THETA_SMALL, THETA_LARGE_INIT)?;
                metrics.add_spectrum(&report);
                let sid = spectrum_id(task, 0);
                out.spectra.push(SpectrumRecord {
                    id: sid.clone(),
                    cell: cell.index,
                    instance: task.instance,
                    stage: 0,
                    eigenvalues: report.eigenvalues,
                });
                id = Some(sid);
            }
            out.rows.push(row(0, metrics, id));
        }
        ExperimentKind::VqaSweep | ExperimentKind::HessianTrajectory | ExperimentKind::PaddingSweep => {
            let mut oc = cfg.optimizer.clone();
            if cfg.kind == ExperimentKind::HessianTrajectory {
                oc.hessian_snapshots = true;
            }
            if !cfg.wants_hessian(task.instance) {
                oc.hessian_snapshots = false;
            }
            let mut schedule = oc.schedule();
            if !schedule.contains(&oc.steps) {
                schedule.push(oc.steps);
            }
            oc.snapshot_schedule = Some(schedule);
            let eg = ctx.ground_energy.expect("ground energy computed for optimizer runs");
            let rec = optimizer::run(&spec, &ctx.model, &theta, &oc, eg)?;
            for Snapshot { tau, energy, delta_e, renyi2, hessian, .. } in &rec.snapshots {
                let mut metrics = Metrics {
                    energy: *energy,
                    delta_e: Some(*delta_e),
                    renyi: Some(*renyi2),
                    success: Some(rec.success),
                    steps_to_success: rec.steps_to_success,
                    grad_norm: Some(rec.grad_norm[*tau]),
                    ..Default::default()
                };
                let mut id = None;
                if let Some(report) = hessian {
                    metrics.add_spectrum(report);
                    let sid = spectrum_id(task, *tau);
                    out.spectra.push(SpectrumRecord {
                        id: sid.clone(),
                        cell: cell.index,
                        instance: task.instance,
                        stage: *tau,
                        eigenvalues: report.eigenvalues.clone(),
                    });
                    id = Some(sid);
                }
                out.rows.push(row(*tau, metrics, id));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedTask {
    pub cell: usize,
    pub instance: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub total_tasks: usize,
    /// Written tasks, a prefix of the canonical task order.
    pub completed: Vec<CompletedTask>,
    pub rows_bytes: u64,
    pub spectra_bytes: u64,
    pub started_unix: u64,
    pub updated_unix: u64,
    pub finished: bool,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Self>, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| HarnessError::Config(format!("{}: unreadable manifest: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(HarnessError::io(path, e)),
        }
    }

    fn store(&self, dir: &Path) -> Result<(), HarnessError> {
        let tmp = dir.join("manifest.json.tmp");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&tmp, text).map_err(|e| HarnessError::io(&tmp, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::rename(&tmp, &path).map_err(|e| HarnessError::io(path, e))
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub resume: bool,
    /// Stop after writing this many new tasks.
    pub max_tasks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub skipped: usize,
    pub executed: usize,
    pub finished: bool,
    pub output_dir: PathBuf,
}

fn open_truncated(path: &Path, len: u64) -> Result<File, HarnessError> {
    let f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| HarnessError::io(path, e))?;
    f.set_len(len).map_err(|e| HarnessError::io(path, e))?;
    Ok(f)
}

fn serialize_lines<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("record serializes");
        buf.push(b'\n');
    }
    buf
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let tasks = config.tasks();

    let existing = Manifest::load(&dir)?;
    let mut manifest = match existing {
        Some(m) if opts.resume => {
            if m.config.fingerprint() != config.fingerprint() {
                return Err(HarnessError::Config(format!(
                    "{} holds results of a different config; choose another output directory",
                    dir.display()
                )));
            }
            m
        }
        Some(_) => {
            return Err(HarnessError::Config(format!(
                "{} already holds results; pass --resume to continue them or choose another output directory",
                dir.display()
            )))
        }
        None => Manifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            master_seed: config.seed,
            total_tasks: tasks.len(),
            completed: Vec::new(),
            rows_bytes: 0,
            spectra_bytes: 0,
            started_unix: now(),
            updated_unix: now(),
            finished: false,
        },
    };
    manifest.config.output_dir = config.output_dir.clone();
    let skipped = manifest.completed.len();
    for (c, t) in manifest.completed.iter().zip(&tasks) {
        if (c.cell, c.instance, c.seed) != (t.cell, t.instance, t.seed) {
            return Err(HarnessError::Config("manifest task list does not match the config".into()));
        }
    }

    let rows_path = dir.join(ROWS_FILE);
    let spectra_path = dir.join(SPECTRA_FILE);
    let mut rows_file = open_truncated(&rows_path, manifest.rows_bytes)?;
    let mut spectra_file = open_truncated(&spectra_path, manifest.spectra_bytes)?;
    manifest.store(&dir)?;

    let mut pending: Vec<Task> = tasks[skipped..].to_vec();
    if let Some(m) = opts.max_tasks {
        pending.truncate(m);
    }
    let ctx = Context::new(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;

    let mut executed = 0;
    let mut failure: Option<HarnessError> = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<TaskOutput, HarnessError>)>();
        let ctx = &ctx;
        let pending = &pending;
        let pool = &pool;
        scope.spawn(move || {
            pool.install(|| {
                let _ = pending.par_iter().try_for_each_with(tx, |tx, task| {
                    let out = execute(ctx, task);
                    tx.send((task.index, out)).map_err(|_| ())
                });
            });
        });
        let mut buffer: BTreeMap<usize, TaskOutput> = BTreeMap::new();
        let mut next = pending.first().map_or(0, |t| t.index);
        for (index, out) in rx {
            match out {
                Ok(out) => {
                    buffer.insert(index, out);
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
            while let Some(out) = buffer.remove(&next) {
                let task = &tasks[next];
                let r = serialize_lines(&out.rows);
                let s = serialize_lines(&out.spectra);
                let write = rows_file
                    .write_all(&r)
                    .and_then(|_| rows_file.flush())
                    .map_err(|e| HarnessError::io(&rows_path, e))
                    .and_then(|_| {
                        spectra_file
                            .write_all(&s)
                            .and_then(|_| spectra_file.flush())
                            .map_err(|e| HarnessError::io(&spectra_path, e))
                    });
                if let Err(e) = write {
                    failure = Some(e);
                    break;
                }
                manifest.rows_bytes += r.len() as u64;
                manifest.spectra_bytes += s.len() as u64;
                manifest.completed.push(CompletedTask { cell: task.cell, instance: task.instance, seed: task.seed });
                manifest.updated_unix = now();
                manifest.finished = manifest.completed.len() == manifest.total_tasks;
                if let Err(e) = manifest.store(&dir) {
                    failure = Some(e);
                    break;
                }
                executed += 1;
                next += 1;
            }
            if failure.is_some() {
                break;
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    write_summary_csv(&dir)?;
    Ok(RunSummary { total: tasks.len(), skipped, executed, finished: manifest.finished, output_dir: dir })
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| HarnessError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flatten rows.jsonl into summary.csv.
pub fn write_summary_csv(dir: &Path) -> Result<(), HarnessError> {
    let rows: Vec<ResultRow> = read_jsonl(&dir.join(ROWS_FILE))?;
    let path = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::io(&path, e.into()))?;
    let header = [
        "cell",
        "p",
        "l",
        "l_pad",
        "instance",
        "seed",
        "stage",
        "energy",
        "delta_e",
        "renyi",
        "success",
        "steps_to_success",
        "grad_norm",
        "grad_fixed",
        "grad_sq_mean",
        "diag_sq",
        "h_top",
        "h_bottom",
        "frac_small",
        "frac_large",
        "overlap_small",
        "overlap_large",
        "theta_large",
        "spectrum",
    ];
    let io = |e: csv::Error| HarnessError::io(&path, e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.cell.to_string(),
            r.p.to_string(),
            r.l.to_string(),
            r.l_pad.to_string(),
            r.instance.to_string(),
            r.seed.to_string(),
            r.stage.to_string(),
            m.energy.to_string(),
            opt(m.delta_e),
            opt(m.renyi),
            opt(m.success),
            opt(m.steps_to_success),
            opt(m.grad_norm),
            opt(m.grad_fixed),
            opt(m.grad_sq_mean),
            opt(m.diag_sq),
            opt(m.h_top),
            opt(m.h_bottom),
            opt(m.frac_small),
            opt(m.frac_large),
            opt(m.overlap_small),
            opt(m.overlap_large),
            opt(m.theta_large),
            r.spectrum.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))
}
