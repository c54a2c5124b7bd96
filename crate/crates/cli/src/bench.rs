//! Repeated simulation runs. Every run appends one line to `runs.csv` as soon
//! as it finishes, so a failure later in the suite keeps earlier results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Value};

use pme::dataset::{generate, sphere_truth, GeneratorSpec, Setting};
use pme::gluing::fit_closed;
use pme::hdmde::{hdmde, outlier_weight};
use pme::interior::{classify_grid, regular_grid};
use pme::pme::{baseline_isomap_fit, select_lambda};

use crate::config::RunConfig;
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Table1,
    Table2,
    Outliers,
    Sphere,
}

/// One metric from one run.
struct Row {
    setting: String,
    method: &'static str,
    n: usize,
    lambda: Option<f64>,
    value: f64,
    itr: usize,
}

struct Plan {
    /// (label, setting, n) per case.
    cases: Vec<(String, Setting, usize)>,
    grid_res: usize,
}

fn plan(suite: Suite, n: Option<usize>, full: bool) -> Plan {
    let table_n = n.unwrap_or(if full { 1000 } else { 500 });
    let cases = match suite {
        Suite::Table1 => [Setting::Fig3aLike, Setting::Fig3b, Setting::Fig3c, Setting::Fig3d]
            .map(|s| (s.name().to_string(), s, table_n))
            .to_vec(),
        Suite::Table2 => [Setting::Fig4a, Setting::Fig4b, Setting::Fig4Surface]
            .map(|s| (s.name().to_string(), s, table_n))
            .to_vec(),
        Suite::Outliers => {
            let sizes: Vec<usize> = match (n, full) {
                (Some(n), _) => vec![n],
                (None, false) => vec![1000, 5000],
                (None, true) => vec![1000, 5000, 10000, 20000],
            };
            sizes
                .into_iter()
                .map(|i| (format!("circle-with-outliers/I={i}"), Setting::CircleWithOutliers, i))
                .collect()
        }
        Suite::Sphere => vec![(
            Setting::PunchedSphereNoiseless.name().to_string(),
            Setting::PunchedSphereNoiseless,
            n.unwrap_or(10000),
        )],
    };
    Plan {
        cases,
        grid_res: if full { 80 } else { 40 },
    }
}

fn run_once(suite: Suite, label: &str, setting: Setting, n: usize, seed: u64, cfg: &RunConfig, grid_res: usize) -> Result<Vec<Row>> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let x = generate(GeneratorSpec::new(setting, n, seed))?.points;
    let row = |method, lambda, value, itr| Row {
        setting: label.to_string(),
        method,
        n,
        lambda,
        value,
        itr,
    };
    match suite {
        Suite::Table1 | Suite::Table2 => {
            let d = setting.intrinsic_dim();
            let opts = cfg.pme(d);
            let sel = select_lambda(&x, &opts, &cfg.lambda_grid)?;
            let base = baseline_isomap_fit(&x, d, sel.lambda, cfg.isomap_k, &opts.projection)?;
            Ok(vec![
                row("PME", Some(sel.lambda), sel.fit.msd, sel.fit.n_iter),
                row("ISOMAP-baseline", Some(sel.lambda), base.msd, 0),
            ])
        }
        Suite::Outliers => {
            let (w, _) = hdmde(&x, &cfg.hdmde())?;
            // the outliers sit at the origin, well inside the unit circle
            let ratio = outlier_weight(&w, &[0.0, 0.0], 0.2).map_or(0.0, |o| o.ratio);
            Ok(vec![row("HDMDE", None, ratio, 0)])
        }
        Suite::Sphere => {
            let cf = fit_closed(&x, &cfg.closed(2, None))?;
            let grid = regular_grid(&[(-1.2, 1.2); 3], &[grid_res; 3])?;
            let labels = classify_grid(&cf, &[0.0, 0.0, 0.0], &grid, &cfg.projection())?;
            let err = labels.error_rate(&sphere_truth(&grid))?;
            let itr = cf.info.iter().map(|i| i.n_iter).sum::<usize>() / cf.len();
            Ok(vec![row("PME", None, err, itr)])
        }
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(suite: Suite, runs: usize, n: Option<usize>, full: bool, cfg: &RunConfig, out: &Path) -> Result<Value> {
    if runs == 0 {
        return Err(CliError::Usage("runs must be positive".into()));
    }
    let plan = plan(suite, n, full);
    let io = |e: std::io::Error| CliError::from(pme::Error::from(e));
    let mut log = BufWriter::new(File::create(out.join("runs.csv")).map_err(io)?);
    writeln!(log, "setting,method,run,seed,n,lambda,value,itr,status").map_err(io)?;

    let mut rows: Vec<Row> = Vec::new();
    let mut failed = 0usize;
    for (label, setting, size) in &plan.cases {
        for r in 0..runs {
            let seed = cfg.seed + r as u64;
            match run_once(suite, label, *setting, *size, seed, cfg, plan.grid_res) {
                Ok(got) => {
                    for g in got {
                        let lambda = g.lambda.map_or(String::new(), |l| l.to_string());
                        writeln!(log, "{},{},{r},{seed},{},{lambda},{},{},ok", g.setting, g.method, g.n, g.value, g.itr)
                            .map_err(io)?;
                        rows.push(g);
                    }
                }
                Err(e) => {
                    failed += 1;
                    eprintln!("{label} run {r}: {e}");
                    writeln!(log, "{label},,{r},{seed},{size},,,,{}", csv_field(&format!("error: {e}"))).map_err(io)?;
                }
            }
            log.flush().map_err(io)?;
        }
    }

    let mut summary = String::from("setting,method,mean,sd,itr\n");
    let mut keys: Vec<(String, &'static str)> = Vec::new();
    for r in &rows {
        if !keys.iter().any(|(s, m)| *s == r.setting && *m == r.method) {
            keys.push((r.setting.clone(), r.method));
        }
    }
    let mut table = Vec::new();
    for (s, m) in &keys {
        let sel: Vec<&Row> = rows.iter().filter(|r| r.setting == *s && r.method == *m).collect();
        let vals: Vec<f64> = sel.iter().map(|r| r.value).collect();
        let (mean, sd) = mean_sd(&vals);
        let itr = sel.iter().map(|r| r.itr as f64).sum::<f64>() / sel.len() as f64;
        summary.push_str(&format!("{s},{m},{mean},{sd},{itr}\n"));
        table.push(json!({"setting": s, "method": m, "mean": mean, "sd": sd, "itr": itr}));
    }
    std::fs::write(out.join("summary.csv"), summary).map_err(io)?;

    let total = plan.cases.len() * runs;
    if failed > 0 {
        return Err(CliError::RunsFailed { failed, total });
    }
    Ok(json!({"command": "benchmark", "runs": total, "summary": table, "out": out}))
}
