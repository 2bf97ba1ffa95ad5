use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{RunMetrics, EPOCH_UNIT};
use super::train::{seed_dir, Experiment, Trainer};
use crate::error::{Error, Result};

/// Median where a missing value counts as "later than anything". Returns
/// `None` when the median itself is censored.
pub fn censored_median(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |e| e as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    m.is_finite().then_some(m)
}

/// Per-label line of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    pub variant: String,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    /// Per seed, `None` for no convergence.
    pub epochs_to_threshold: Vec<Option<usize>>,
    pub median_epochs: Option<f64>,
    /// Classical median divided by this label's median.
    pub speedup_vs_classical: Option<f64>,
    pub best_reward: Vec<Option<f64>>,
    pub mean_best_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub epoch_unit: String,
    pub eval_every: usize,
    pub classical_median_epochs: Option<f64>,
    pub labels: Vec<LabelReport>,
}

impl ComparisonReport {
    pub fn label(&self, label: &str) -> Option<&LabelReport> {
        self.labels.iter().find(|l| l.label == label)
    }

    /// Plain-text table for terminals.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>9} {:>10} {:>9} {:>12}  per-seed epochs",
            "label", "threshold", "median", "speedup", "best reward"
        );
        for l in &self.labels {
            let per_seed: Vec<String> = l
                .epochs_to_threshold
                .iter()
                .map(|e| e.map_or("-".into(), |e| e.to_string()))
                .collect();
            let _ = writeln!(
                s,
                "{:<22} {:>9.4} {:>10} {:>9} {:>12}  [{}]",
                l.label,
                l.threshold,
                l.median_epochs
                    .map_or("no conv.".into(), |m| format!("{m:.1}")),
                l.speedup_vs_classical
                    .map_or("-".into(), |r| format!("{r:.2}x")),
                l.mean_best_reward.map_or("-".into(), |r| format!("{r:.4}")),
                per_seed.join(" ")
            );
        }
        let _ = writeln!(s, "({EPOCH_UNIT}; '-' means no convergence)");
        s
    }
}

/// Groups runs by label and computes convergence statistics. Classical runs
/// form the reference median.
pub fn build_report(runs: &[RunMetrics]) -> Result<ComparisonReport> {
    if runs.len() < 2 {
        return Err(Error::Usage("a comparison needs at least two runs".into()));
    }
    let eval_every = runs[0].eval_every;
    if let Some(r) = runs.iter().find(|r| r.eval_every != eval_every) {
        return Err(Error::Usage(format!(
            "run `{}` evaluates every {} epochs, `{}` every {eval_every}",
            r.label, r.eval_every, runs[0].label
        )));
    }
    let classical: Vec<Option<usize>> = runs
        .iter()
        .filter(|r| r.variant == "classical")
        .map(RunMetrics::epochs_to_threshold)
        .collect();
    let classical_median = censored_median(&classical);

    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        if !groups.contains_key(r.label.as_str()) {
            order.push(&r.label);
        }
        groups.entry(&r.label).or_default().push(r);
    }
    let labels = order
        .into_iter()
        .map(|label| {
            let g = &groups[label];
            let epochs: Vec<Option<usize>> = g.iter().map(|r| r.epochs_to_threshold()).collect();
            let median = censored_median(&epochs);
            let best: Vec<Option<f64>> = g
                .iter()
                .map(|r| r.best().map(|b| b.mean_test_reward))
                .collect();
            let finite: Vec<f64> = best.iter().flatten().copied().collect();
            LabelReport {
                label: label.to_string(),
                variant: g[0].variant.clone(),
                seeds: g.iter().map(|r| r.seed).collect(),
                threshold: g[0].threshold,
                epochs_to_threshold: epochs,
                median_epochs: median,
                speedup_vs_classical: match (classical_median, median) {
                    (Some(c), Some(m)) if m > 0.0 => Some(c / m),
                    _ => None,
                },
                mean_best_reward: (!finite.is_empty())
                    .then(|| finite.iter().sum::<f64>() / finite.len() as f64),
                best_reward: best,
            }
        })
        .collect();
    Ok(ComparisonReport {
        epoch_unit: EPOCH_UNIT.into(),
        eval_every,
        classical_median_epochs: classical_median,
        labels,
    })
}

/// Long-format curves (`label,seed,epoch,...`) and the per-label mean reward
/// aligned by epoch.
pub fn write_curves(runs: &[RunMetrics], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let long = dir.join("curves.csv");
    let mut w = csv::Writer::from_path(&long)?;
    w.write_record([
        "label",
        "seed",
        "epoch",
        "mean_test_reward",
        "violation_kh",
        "energy_kwh",
    ])?;
    for r in runs {
        for row in &r.rows {
            w.write_record([
                r.label.clone(),
                r.seed.to_string(),
                row.epoch.to_string(),
                row.mean_test_reward.to_string(),
                row.violation_kh.to_string(),
                row.energy_kwh.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut labels: Vec<&str> = Vec::new();
    for r in runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut table: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for r in runs {
        let col = labels
            .iter()
            .position(|l| *l == r.label)
            .expect("label listed");
        for row in &r.rows {
            let cells = table
                .entry(row.epoch)
                .or_insert_with(|| vec![(0.0, 0); labels.len()]);
            cells[col].0 += row.mean_test_reward;
            cells[col].1 += 1;
        }
    }
    let wide = dir.join("curves_mean.csv");
    let mut w = csv::Writer::from_path(&wide)?;
    let mut header = vec!["epoch".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    w.write_record(&header)?;
    for (epoch, cells) in table {
        let mut rec = vec![epoch.to_string()];
        rec.extend(cells.iter().map(|&(s, n)| {
            if n == 0 {
                String::new()
            } else {
                (s / n as f64).to_string()
            }
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(vec![long, wide])
}

/// Result of [`compare`].
#[derive(Debug)]
pub struct Comparison {
    pub runs: Vec<RunMetrics>,
    pub report: ComparisonReport,
    /// Report and curve files, when an output directory was given.
    pub files: Vec<PathBuf>,
}

/// Trains every configuration on every one of its seeds, `workers` runs at a
/// time, and compares them.
pub fn compare(configs: &[RunConfig], workers: usize, out: Option<&Path>) -> Result<Comparison> {
    let mut labels: Vec<String> = configs.iter().map(RunConfig::label).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Usage(
            "configurations must have distinct labels".into(),
        ));
    }
    let experiments = configs
        .iter()
        .map(Experiment::new)
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.harness.seeds.iter().map(move |&s| (i, s)))
        .collect();
    if jobs.len() < 2 {
        return Err(Error::Usage("a comparison needs at least two runs".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunMetrics>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let cfg = &configs[i];
                let mut t = Trainer::new(cfg, &experiments[i], seed);
                if let Some(root) = out {
                    t = t.output_dir(seed_dir(root, &cfg.label(), seed));
                }
                t.run().map(|o| o.metrics)
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let report = build_report(&runs)?;
    let mut files = Vec::new();
    if let Some(root) = out {
        std::fs::create_dir_all(root)?;
        let path = root.join("comparison.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        files.push(path);
        files.extend(write_curves(&runs, root)?);
    }
    Ok(Comparison {
        runs,
        report,
        files,
    })
}
