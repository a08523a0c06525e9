//! Aggregates a results directory into curves, a summary and a ranking.
//!
//! The output depends only on the files under the input directory: runs are
//! visited in sorted path order and nothing time- or host-dependent is
//! written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{csv_err, io_err, Result};
use crate::records::{read_evals, EvalRow, Manifest, CONFIG_FILE, EVALS_FILE, MANIFEST_FILE, STATUS_COMPLETE};
use crate::runner::method_slug;

/// Evaluation points averaged for a run's final-window return.
pub const FINAL_WINDOW: usize = 3;

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub evals: Vec<EvalRow>,
}

impl RunRecord {
    /// Mean return over the last `FINAL_WINDOW` evaluations (fewer if the
    /// curve is shorter); `None` without evaluations.
    pub fn final_window_return(&self) -> Option<f64> {
        let n = self.evals.len().min(FINAL_WINDOW);
        if n == 0 {
            return None;
        }
        let tail = &self.evals[self.evals.len() - n..];
        Some(tail.iter().map(|e| e.mean_return).sum::<f64>() / n as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Collected {
    pub runs: Vec<RunRecord>,
    /// Run directories without a complete manifest, relative to the root.
    pub incomplete: Vec<PathBuf>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn walk(root: &Path, dir: &Path, acc: &mut Collected) -> Result<()> {
    let manifest = dir.join(MANIFEST_FILE);
    let rel = || dir.strip_prefix(root).unwrap_or(dir).to_path_buf();
    if manifest.is_file() {
        let m = Manifest::read(&manifest)?;
        if m.status != STATUS_COMPLETE {
            acc.incomplete.push(rel());
            return Ok(());
        }
        let evals_path = dir.join(EVALS_FILE);
        let evals = if evals_path.is_file() { read_evals(&evals_path)? } else { Vec::new() };
        acc.runs.push(RunRecord {
            dir: rel(),
            manifest: m,
            evals,
        });
        return Ok(());
    }
    if dir.join(CONFIG_FILE).is_file() {
        acc.incomplete.push(rel());
        return Ok(());
    }
    for entry in sorted_entries(dir)? {
        if entry.is_dir() {
            walk(root, &entry, acc)?;
        }
    }
    Ok(())
}

/// Finds every run directory under `root`.
pub fn collect(root: &Path) -> Result<Collected> {
    if !root.is_dir() {
        return Err(io_err(root)(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "results directory not found",
        )));
    }
    let mut acc = Collected::default();
    walk(root, root, &mut acc)?;
    Ok(acc)
}

/// Total order on ρ for grouping (ρ is always finite and positive).
#[derive(Debug, Clone, Copy)]
struct Rho(f64);

impl PartialEq for Rho {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Rho {}

impl PartialOrd for Rho {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rho {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn mean_opt(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

const SUMMARY_COLUMNS: [&str; 10] = [
    "method",
    "best_rho",
    "seeds",
    "final_return",
    "final_return_std",
    "coverage",
    "explore_fraction",
    "exploit_entropy",
    "explor_entropy",
    "skill_accuracy",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub best_rho: f64,
    pub seeds: usize,
    /// Seed mean of the final-window return at the best ρ.
    pub final_return: Option<f64>,
    pub final_return_std: Option<f64>,
    pub coverage: f64,
    pub explore_fraction: f64,
    pub exploit_entropy: Option<f64>,
    pub explor_entropy: Option<f64>,
    pub skill_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub curves: BTreeMap<String, Vec<CurveRow>>,
    pub incomplete: Vec<PathBuf>,
}

/// Mean and sample std across seeds at each evaluation step.
fn curve(runs: &[&RunRecord]) -> Vec<CurveRow> {
    let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for e in &r.evals {
            by_step.entry(e.step).or_default().push(e.mean_return);
        }
    }
    by_step
        .into_iter()
        .map(|(step, v)| CurveRow {
            step,
            mean: mean(&v),
            std: sample_std(&v),
            n: v.len(),
        })
        .collect()
}

/// Picks each method's best ρ by seed-averaged final-window return (ties go
/// to the smaller ρ) and aggregates its seeds.
pub fn build(collected: &Collected) -> Report {
    let mut groups: BTreeMap<&str, BTreeMap<Rho, Vec<&RunRecord>>> = BTreeMap::new();
    for r in &collected.runs {
        groups
            .entry(r.manifest.method.as_str())
            .or_default()
            .entry(Rho(r.manifest.rho))
            .or_default()
            .push(r);
    }
    let mut summary = Vec::new();
    let mut curves = BTreeMap::new();
    for (method, by_rho) in groups {
        let mut best: Option<(Rho, Option<f64>)> = None;
        for (&rho, runs) in &by_rho {
            let score = mean_opt(runs.iter().map(|r| r.final_window_return()));
            let better = match best {
                None => true,
                Some((_, b)) => score.unwrap_or(f64::NEG_INFINITY) > b.unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                best = Some((rho, score));
            }
        }
        let (rho, score) = best.expect("every group has a run");
        let runs = &by_rho[&rho];
        let finals: Vec<f64> = runs.iter().filter_map(|r| r.final_window_return()).collect();
        summary.push(SummaryRow {
            method: method.to_string(),
            best_rho: rho.0,
            seeds: runs.len(),
            final_return: score,
            final_return_std: (!finals.is_empty()).then(|| sample_std(&finals)),
            coverage: mean(&runs.iter().map(|r| r.manifest.coverage as f64).collect::<Vec<_>>()),
            explore_fraction: mean(&runs.iter().map(|r| r.manifest.explore_fraction).collect::<Vec<_>>()),
            exploit_entropy: mean_opt(runs.iter().map(|r| r.manifest.exploit_entropy)),
            explor_entropy: mean_opt(runs.iter().map(|r| r.manifest.explor_entropy)),
            skill_accuracy: mean_opt(runs.iter().map(|r| r.manifest.skill_accuracy)),
        });
        curves.insert(method.to_string(), curve(runs));
    }
    Report {
        summary,
        curves,
        incomplete: collected.incomplete.clone(),
    }
}

impl Report {
    /// Methods by final return, highest first; ties and missing returns by name.
    pub fn ranking(&self) -> Vec<&SummaryRow> {
        let mut rows: Vec<&SummaryRow> = self.summary.iter().collect();
        rows.sort_by(|a, b| {
            let key = |r: &SummaryRow| r.final_return.unwrap_or(f64::NEG_INFINITY);
            key(b).total_cmp(&key(a)).then_with(|| a.method.cmp(&b.method))
        });
        rows
    }

    pub fn ranking_text(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.ranking().into_iter().enumerate() {
            let ret = r.final_return.map_or("n/a".to_string(), |x| format!("{x:.4}"));
            writeln!(out, "{:>2}. {:<16} return {ret} rho {} seeds {}", i + 1, r.method, r.best_rho, r.seeds)
                .expect("writing to a string");
        }
        out
    }

    /// Writes `summary.csv`, `ranking.txt`, `incomplete.txt` and
    /// `curves/<method>.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let curves_dir = dir.join("curves");
        std::fs::create_dir_all(&curves_dir).map_err(io_err(&curves_dir))?;

        let path = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        if self.summary.is_empty() {
            w.write_record(SUMMARY_COLUMNS).map_err(csv_err(&path))?;
        }
        for row in &self.summary {
            w.serialize(row).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;

        for (method, rows) in &self.curves {
            let path = curves_dir.join(format!("{}.csv", method_slug(method)));
            let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
            if rows.is_empty() {
                w.write_record(["step", "mean", "std", "n"]).map_err(csv_err(&path))?;
            }
            for row in rows {
                w.serialize(row).map_err(csv_err(&path))?;
            }
            w.flush().map_err(io_err(&path))?;
        }

        let path = dir.join("ranking.txt");
        std::fs::write(&path, self.ranking_text()).map_err(io_err(&path))?;
        let path = dir.join("incomplete.txt");
        let listing: String = self.incomplete.iter().map(|p| format!("{}\n", p.display())).collect();
        std::fs::write(&path, listing).map_err(io_err(&path))
    }
}

/// Collects, aggregates and writes a report in one step.
pub fn report(input: &Path, output: &Path) -> Result<Report> {
    let r = build(&collect(input)?);
    r.write(output)?;
    Ok(r)
}
