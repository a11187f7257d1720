//! Figure-data tables aggregated from a result directory.
//!
//! Each panel writes `panels/<id>.csv` and `panels/<id>.gaps.json`. A gap
//! is a sweep cell for which the panel's filter selects nothing; it is
//! reported rather than filled in.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use vqa_core::stats::{median, quantile, MomentEstimate, VarianceEstimate};

use crate::config::{Cell, ExperimentConfig, Sweep};
use crate::error::HarnessError;
use crate::runner::{read_jsonl, Manifest, ResultRow, SpectrumRecord, ROWS_FILE, SPECTRA_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Aggregate {
    Variance,
    Purity,
    Scatter,
    Entropy,
    Success,
    Steps,
    StripsInitial,
    StripsFinal,
    SpectralInitial,
    SpectralFinal,
    Evolution,
}

/// Panel ids and what they aggregate. Depth-sweep panels reuse the
/// dropout-sweep aggregations with the depth as cell label.
pub const PANELS: &[(&str, &str)] = &[
    ("fig1a", "gradient variance and mean entropy per cell"),
    ("fig1b", "mean diagonal and off-diagonal E[ρ_αβ²] per cell"),
    ("fig2a", "ΔE and entropy before and after optimization, per instance"),
    ("fig2b", "entropy before and after optimization, per cell"),
    ("fig2c", "success fraction per cell"),
    ("fig2d", "steps to success over successful instances, per cell"),
    ("fig3a", "Hessian eigenvalue strips at τ = 0"),
    ("fig3b", "Hessian eigenvalue strips at the final step"),
    ("fig4", "initial-point spectral metrics per cell"),
    ("fig5", "endpoint spectral metrics per cell and outcome"),
    ("fig6", "spectral metrics per cell, step and outcome"),
    ("fig7a", "as fig2a over depth"),
    ("fig7b", "as fig2b over depth"),
    ("fig7c", "as fig2c over depth"),
    ("fig7d", "as fig2d over depth"),
    ("fig8a", "as fig3a over depth"),
    ("fig8b", "as fig3b over depth"),
    ("fig9a", "as fig4 over depth"),
    ("fig9b", "as fig5 over depth"),
];

fn aggregate_of(panel: &str) -> Option<Aggregate> {
    use Aggregate::*;
    Some(match panel {
        "fig1a" => Variance,
        "fig1b" => Purity,
        "fig2a" | "fig7a" => Scatter,
        "fig2b" | "fig7b" => Entropy,
        "fig2c" | "fig7c" => Success,
        "fig2d" | "fig7d" => Steps,
        "fig3a" | "fig8a" => StripsInitial,
        "fig3b" | "fig8b" => StripsFinal,
        "fig4" | "fig9a" => SpectralInitial,
        "fig5" | "fig9b" => SpectralFinal,
        "fig6" => Evolution,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub cell: usize,
    pub label: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelTable {
    pub panel: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub gaps: Vec<Gap>,
}

impl PanelTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of `name` in each row; blank cells become NaN.
    pub fn values(&self, name: &str) -> Vec<f64> {
        let c = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect()
    }
}

struct Data {
    config: ExperimentConfig,
    cells: Vec<Cell>,
    rows: Vec<ResultRow>,
    spectra: Vec<SpectrumRecord>,
}

impl Data {
    fn label_name(&self) -> &'static str {
        match self.config.sweep {
            Sweep::P(_) => "p",
            Sweep::LPad(_) | Sweep::L(_) => "l",
        }
    }

    fn label(&self, cell: &Cell) -> f64 {
        match self.config.sweep {
            Sweep::P(_) => cell.p,
            _ => cell.l as f64,
        }
    }

    fn rows_of(&self, cell: usize) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.cell == cell)
    }

    /// Last-stage row of each instance in a cell.
    fn finals(&self, cell: usize) -> Vec<&ResultRow> {
        let mut by: BTreeMap<usize, &ResultRow> = BTreeMap::new();
        for r in self.rows_of(cell) {
            let e = by.entry(r.instance).or_insert(r);
            if r.stage > e.stage {
                *e = r;
            }
        }
        by.into_values().collect()
    }

    fn initials(&self, cell: usize) -> Vec<&ResultRow> {
        self.rows_of(cell).filter(|r| r.stage == 0).collect()
    }
}

fn load(dir: &Path) -> Result<Data, HarnessError> {
    let manifest = Manifest::load(dir)?.ok_or_else(|| {
        HarnessError::Config(format!("{} has no manifest; run an experiment there first", dir.display()))
    })?;
    let config = manifest.config;
    Ok(Data {
        cells: config.cells(),
        rows: read_jsonl(&dir.join(ROWS_FILE))?,
        spectra: read_jsonl(&dir.join(SPECTRA_FILE))?,
        config,
    })
}

fn f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn est(e: MomentEstimate) -> [String; 2] {
    [f(e.value), f(e.std_error)]
}

fn collect(rows: &[&ResultRow], get: impl Fn(&ResultRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| get(r)).filter(|x| x.is_finite()).collect()
}

fn mean_se(xs: &[f64]) -> [String; 2] {
    if xs.len() < 2 {
        return [xs.first().map(|x| f(*x)).unwrap_or_default(), String::new()];
    }
    est(MomentEstimate::from_samples(xs))
}

fn quartiles(xs: &[f64]) -> [String; 3] {
    if xs.is_empty() {
        return Default::default();
    }
    [f(quantile(xs, 0.25)), f(median(xs)), f(quantile(xs, 0.75))]
}

const SPECTRAL: [&str; 6] = ["h_top", "h_bottom", "frac_small", "frac_large", "overlap_small", "overlap_large"];

fn spectral_value(r: &ResultRow, name: &str) -> Option<f64> {
    let m = &r.metrics;
    match name {
        "h_top" => m.h_top,
        "h_bottom" => m.h_bottom,
        "frac_small" => m.frac_small,
        "frac_large" => m.frac_large,
        "overlap_small" => m.overlap_small,
        "overlap_large" => m.overlap_large,
        _ => None,
    }
}

fn spectral_header() -> Vec<String> {
    SPECTRAL.iter().flat_map(|s| ["q25", "median", "q75"].map(|q| format!("{s}_{q}"))).collect()
}

fn spectral_columns(rows: &[&ResultRow]) -> Vec<String> {
    SPECTRAL.iter().flat_map(|s| quartiles(&collect(rows, |r| spectral_value(r, s)))).collect()
}

fn has_spectrum(r: &&ResultRow) -> bool {
    r.metrics.h_top.is_some()
}

fn outcome(r: &ResultRow) -> &'static str {
    match r.metrics.success {
        Some(true) => "success",
        Some(false) => "failure",
        None => "unknown",
    }
}

fn build(panel: &str, d: &Data) -> Result<PanelTable, HarnessError> {
    let agg = aggregate_of(panel).ok_or_else(|| {
        let ids: Vec<&str> = PANELS.iter().map(|p| p.0).collect();
        HarnessError::Config(format!("unknown panel {panel}; choose one of {} or all", ids.join(", ")))
    })?;
    let lname = d.label_name();
    let mut header: Vec<String> = vec![lname.to_string()];
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    let mut gap = |cell: &Cell, reason: &str| {
        gaps.push(Gap { cell: cell.index, label: d.label(cell), reason: reason.to_string() })
    };
    let n = d.config.n;
    let dim = (1u64 << n) as f64;
    use Aggregate::*;
    match agg {
        Variance => {
            header.extend(
                ["samples", "var_grad", "var_grad_se", "mean_grad_sq", "mean_grad_sq_se", "renyi_mean", "renyi_se"]
                    .map(String::from),
            );
            for c in &d.cells {
                let rs = d.initials(c.index);
                let g = collect(&rs, |r| r.metrics.grad_fixed);
                if g.len() < 2 {
                    gap(c, "fewer than two gradient samples");
                    continue;
                }
                let v = VarianceEstimate::from_samples(&g);
                let mut row = vec![f(d.label(c)), g.len().to_string(), f(v.variance), f(v.std_error)];
                row.extend(mean_se(&collect(&rs, |r| r.metrics.grad_sq_mean)));
                row.extend(mean_se(&collect(&rs, |r| r.metrics.renyi)));
                rows.push(row);
            }
        }
        Purity => {
            header.extend(
                [
                    "samples",
                    "diag_mean",
                    "diag_se",
                    "offdiag_mean",
                    "offdiag_se",
                    "diag_product",
                    "offdiag_product",
                    "diag_haar",
                    "offdiag_haar",
                ]
                .map(String::from),
            );
            let prod_sum = 0.75f64.powi(n as i32);
            for c in &d.cells {
                let rs = d.initials(c.index);
                let s = collect(&rs, |r| r.metrics.diag_sq);
                if s.len() < 2 {
                    gap(c, "fewer than two purity samples");
                    continue;
                }
                let diag: Vec<f64> = s.iter().map(|x| x / dim).collect();
                let off: Vec<f64> = s.iter().map(|x| (1.0 - x) / (dim * (dim - 1.0))).collect();
                let mut row = vec![f(d.label(c)), s.len().to_string()];
                row.extend(mean_se(&diag));
                row.extend(mean_se(&off));
                row.extend([
                    f(prod_sum / dim),
                    f((1.0 - prod_sum) / (dim * (dim - 1.0))),
                    f(3.0 / (dim * (dim + 2.0))),
                    f(1.0 / (dim * (dim + 2.0))),
                ]);
                rows.push(row);
            }
        }
        Scatter => {
            header.extend(
                ["instance", "delta_e_initial", "delta_e_final", "renyi_initial", "renyi_final", "success"]
                    .map(String::from),
            );
            for c in &d.cells {
                let init: BTreeMap<usize, &ResultRow> =
                    d.initials(c.index).into_iter().map(|r| (r.instance, r)).collect();
                let fin = d.finals(c.index);
                if fin.is_empty() {
                    gap(c, "no rows");
                }
                for r in fin {
                    let i = init.get(&r.instance);
                    rows.push(vec![
                        f(d.label(c)),
                        r.instance.to_string(),
                        i.and_then(|i| i.metrics.delta_e).map(f).unwrap_or_default(),
                        r.metrics.delta_e.map(f).unwrap_or_default(),
                        i.and_then(|i| i.metrics.renyi).map(f).unwrap_or_default(),
                        r.metrics.renyi.map(f).unwrap_or_default(),
                        r.metrics.success.map(|s| s.to_string()).unwrap_or_default(),
                    ]);
                }
            }
        }
        Entropy => {
            header.extend(
                [
                    "instances",
                    "renyi_initial_mean",
                    "renyi_initial_se",
                    "renyi_final_mean",
                    "renyi_final_se",
                    "delta_e_final_median",
                ]
                .map(String::from),
            );
            for c in &d.cells {
                let init = d.initials(c.index);
                let fin = d.finals(c.index);
                if fin.is_empty() {
                    gap(c, "no rows");
                    continue;
                }
                let mut row = vec![f(d.label(c)), fin.len().to_string()];
                row.extend(mean_se(&collect(&init, |r| r.metrics.renyi)));
                row.extend(mean_se(&collect(&fin, |r| r.metrics.renyi)));
                let de = collect(&fin, |r| r.metrics.delta_e);
                row.push(if de.is_empty() { String::new() } else { f(median(&de)) });
                rows.push(row);
            }
        }
        Success => {
            header.extend(["instances", "successes", "success_fraction"].map(String::from));
            for c in &d.cells {
                let fin = d.finals(c.index);
                if fin.is_empty() {
                    gap(c, "no rows");
                    continue;
                }
                let s = fin.iter().filter(|r| r.metrics.success == Some(true)).count();
                rows.push(vec![f(d.label(c)), fin.len().to_string(), s.to_string(), f(s as f64 / fin.len() as f64)]);
            }
        }
        Steps => {
            header.extend(["successes", "mean", "std", "q25", "median", "q75"].map(String::from));
            for c in &d.cells {
                let fin = d.finals(c.index);
                let steps: Vec<f64> = fin.iter().filter_map(|r| r.metrics.steps_to_success).map(|s| s as f64).collect();
                if steps.is_empty() {
                    gap(c, "no successful instances");
                    continue;
                }
                let m = MomentEstimate::from_samples(&steps);
                let sd = if steps.len() > 1 { vqa_core::stats::variance(&steps).sqrt() } else { 0.0 };
                let mut row = vec![f(d.label(c)), steps.len().to_string(), f(m.value), f(sd)];
                row.extend(quartiles(&steps));
                rows.push(row);
            }
        }
        StripsInitial | StripsFinal => {
            header.extend(["instance", "stage", "index", "eigenvalue"].map(String::from));
            let by_id: BTreeMap<&str, &SpectrumRecord> = d.spectra.iter().map(|s| (s.id.as_str(), s)).collect();
            for c in &d.cells {
                let picked = if agg == StripsInitial { d.initials(c.index) } else { d.finals(c.index) };
                let mut any = false;
                for r in picked {
                    if let Some(s) = r.spectrum.as_deref().and_then(|id| by_id.get(id)) {
                        any = true;
                        for (k, e) in s.eigenvalues.iter().enumerate() {
                            rows.push(vec![
                                f(d.label(c)),
                                r.instance.to_string(),
                                r.stage.to_string(),
                                k.to_string(),
                                f(*e),
                            ]);
                        }
                    }
                }
                if !any {
                    gap(c, "no stored spectra at this stage");
                }
            }
        }
        SpectralInitial => {
            header.push("count".into());
            header.extend(spectral_header());
            header.push("max_abs_eigenvalue".into());
            for c in &d.cells {
                let rs: Vec<&ResultRow> = d.initials(c.index).into_iter().filter(has_spectrum).collect();
                if rs.is_empty() {
                    gap(c, "no spectra at τ = 0");
                    continue;
                }
                let mut row = vec![f(d.label(c)), rs.len().to_string()];
                row.extend(spectral_columns(&rs));
                let mx = rs
                    .iter()
                    .map(|r| r.metrics.h_top.unwrap().abs().max(r.metrics.h_bottom.unwrap().abs()))
                    .fold(0.0, f64::max);
                row.push(f(mx));
                rows.push(row);
            }
        }
        SpectralFinal => {
            header.extend(["outcome", "count"].map(String::from));
            header.extend(spectral_header());
            header.push("min_eigenvalue".into());
            for c in &d.cells {
                let fin: Vec<&ResultRow> = d.finals(c.index).into_iter().filter(has_spectrum).collect();
                if fin.is_empty() {
                    gap(c, "no endpoint spectra");
                    continue;
                }
                for which in ["all", "success", "failure"] {
                    let rs: Vec<&ResultRow> =
                        fin.iter().copied().filter(|r| which == "all" || outcome(r) == which).collect();
                    if rs.is_empty() {
                        if which == "success" {
                            gap(c, "no successful instances with endpoint spectra");
                        }
                        continue;
                    }
                    let mut row = vec![f(d.label(c)), which.to_string(), rs.len().to_string()];
                    row.extend(spectral_columns(&rs));
                    row.push(f(rs.iter().map(|r| r.metrics.h_bottom.unwrap()).fold(f64::INFINITY, f64::min)));
                    rows.push(row);
                }
            }
        }
        Evolution => {
            header.extend(["stage", "outcome", "count"].map(String::from));
            header.extend(spectral_header());
            header.extend(["delta_e_median", "renyi_median"].map(String::from));
            for c in &d.cells {
                let mut by: BTreeMap<(usize, &str), Vec<&ResultRow>> = BTreeMap::new();
                for r in d.rows_of(c.index).filter(has_spectrum) {
                    by.entry((r.stage, outcome(r))).or_default().push(r);
                }
                if by.is_empty() {
                    gap(c, "no trajectory spectra");
                }
                if !by.keys().any(|k| k.1 == "success") && !by.is_empty() {
                    gap(c, "no successful instances with trajectory spectra");
                }
                for ((stage, which), rs) in by {
                    let mut row = vec![f(d.label(c)), stage.to_string(), which.to_string(), rs.len().to_string()];
                    row.extend(spectral_columns(&rs));
                    let de = collect(&rs, |r| r.metrics.delta_e);
                    let re = collect(&rs, |r| r.metrics.renyi);
                    row.push(if de.is_empty() { String::new() } else { f(median(&de)) });
                    row.push(if re.is_empty() { String::new() } else { f(median(&re)) });
                    rows.push(row);
                }
            }
        }
    }
    Ok(PanelTable { panel: panel.to_string(), header, rows, gaps })
}

/// Aggregate one panel and write its CSV and gap report under `dir/panels`.
pub fn summarize(dir: &Path, panel: &str) -> Result<PanelTable, HarnessError> {
    let data = load(dir)?;
    let table = build(panel, &data)?;
    let out = dir.join("panels");
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let path = out.join(format!("{panel}.csv"));
    let io = |e: csv::Error| HarnessError::io(&path, e.into());
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for r in &table.rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    let gpath = out.join(format!("{panel}.gaps.json"));
    fs::write(&gpath, serde_json::to_string_pretty(&table.gaps).expect("gaps serialize"))
        .map_err(|e| HarnessError::io(&gpath, e))?;
    Ok(table)
}

pub fn panel_ids() -> impl Iterator<Item = &'static str> {
    PANELS.iter().map(|p| p.0)
}
