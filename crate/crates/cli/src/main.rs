mod bench;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use pme::dataset::{generate, load_point_cloud, GeneratorSpec, LoadOptions, PointCloud, Setting};
use pme::gluing::fit_closed;
use pme::hdmde::hdmde;
use pme::interior::{classify_grid, naive_slice_interior, regular_grid, Provenance};
use pme::io;
use pme::points::Points;
use pme::pme::{pme_fit, select_lambda};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] pme::Error),
    #[error("{}: {err}", path.display())]
    File { path: PathBuf, err: pme::Error },
    #[error("{failed} of {total} runs failed; completed runs are in runs.csv")]
    RunsFailed { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_validation() => 2,
            CliError::Lib(e) | CliError::File { err: e, .. } if e.is_io() => 4,
            CliError::File { err: e, .. } if e.is_validation() => 2,
            CliError::Lib(_) | CliError::File { .. } | CliError::RunsFailed { .. } => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "pme", version, about = "Principal manifold estimation")]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a simulation setting to CSV.
    Generate {
        #[arg(long)]
        setting: Setting,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce a point cloud to a weighted average joint.
    Reduce {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Z-test trace; defaults to the output path with `.trace.csv`.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fit an open manifold.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        d: usize,
        #[arg(long, conflicts_with = "select", required_unless_present = "select")]
        lambda: Option<f64>,
        /// Search the configured λ grid by test MSD.
        #[arg(long)]
        select: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a closed manifold as a glued ring of pieces.
    FitClosed {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        pieces: Option<usize>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Fixed λ for every piece; otherwise each piece selects its own.
        #[arg(long)]
        lambda: Option<f64>,
        /// Also write one OBJ mesh per junction at this grid resolution.
        #[arg(long)]
        mesh: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label grid points as interior or exterior.
    Interior {
        /// Closed-fit directory.
        #[arg(long, required_unless_present = "naive")]
        model: Option<PathBuf>,
        /// Interior reference point, comma separated.
        #[arg(long = "ref", required_unless_present = "naive", allow_hyphen_values = true)]
        reference: Option<String>,
        /// `lo:hi:n` per axis, comma separated; one entry applies to all axes.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Slice scan of slice-tagged boundary points instead of a model.
        #[arg(long, requires = "input")]
        naive: bool,
        /// Boundary points `x,y,z,slice` for `--naive`.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated runs of a simulation suite.
    Benchmark {
        #[arg(long)]
        suite: bench::Suite,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Sample size; defaults to the suite's desk scale.
        #[arg(long)]
        n: Option<usize>,
        /// Full-scale sample sizes and grids.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dump_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_text()).map_err(pme::Error::from)?;
    Ok(())
}

/// Where the resolved configuration goes for a file output.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn at(path: &Path) -> impl FnOnce(pme::Error) -> CliError + '_ {
    move |err| CliError::File { path: path.to_path_buf(), err }
}

fn load(path: &Path, opts: LoadOptions) -> Result<PointCloud> {
    load_point_cloud(path, opts).map_err(at(path))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("{what}: expected comma-separated numbers, got {s:?}")))
}

/// `lo:hi:n[,lo:hi:n...]`, one entry per axis or one for all.
fn parse_grid_spec(s: &str, dim: usize) -> Result<(Vec<(f64, f64)>, Vec<usize>)> {
    let bad = || CliError::Usage(format!("grid: expected lo:hi:n per axis, got {s:?}"));
    let mut bounds = Vec::new();
    let mut res = Vec::new();
    for part in s.split(',') {
        let f: Vec<&str> = part.split(':').collect();
        let [lo, hi, n] = f[..] else { return Err(bad()) };
        bounds.push((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?));
        res.push(n.trim().parse().map_err(|_| bad())?);
    }
    if bounds.len() == 1 {
        bounds = vec![bounds[0]; dim];
        res = vec![res[0]; dim];
    }
    if bounds.len() != dim {
        return Err(CliError::Usage(format!("grid has {} axes, expected {dim}", bounds.len())));
    }
    Ok((bounds, res))
}

fn run(cli: Cli) -> Result<Value> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.set)?;
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    match &cli.cmd {
        Command::Generate { seed: Some(s), .. } => cfg.seed = *s,
        Command::Reduce { alpha, n0, .. } => {
            if let Some(a) = alpha {
                cfg.alpha = *a;
            }
            if n0.is_some() {
                cfg.n0 = *n0;
            }
        }
        Command::FitClosed { pieces: Some(p), .. } => cfg.pieces = *p,
        _ => {}
    }
    cfg.validate()?;
    if let Some(t) = cfg.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }

    match cli.cmd {
        Command::Generate { setting, n, out, .. } => {
            let cloud = generate(GeneratorSpec::new(setting, n, cfg.seed))?;
            io::write_point_cloud(&cloud, &out)?;
            dump_config(&cfg, &sidecar(&out, ".config"))?;
            Ok(json!({"command": "generate", "setting": setting.name(), "n": cloud.len(), "seed": cfg.seed, "out": out}))
        }
        Command::Reduce { input, out, trace, .. } => {
            let cloud = load(&input, LoadOptions::default())?;
            let opts = cfg.hdmde();
            let (waj, reports) = hdmde(&cloud.points, &opts)?;
            let n0 = opts.n0.unwrap_or(20 * cloud.dim());
            io::write_waj(&waj, io::WajHeader { alpha: cfg.alpha, n0 }, &out)?;
            let trace = trace.unwrap_or_else(|| sidecar(&out, ".trace.csv"));
            io::write_z_trace(&reports, &trace)?;
            dump_config(&cfg, &sidecar(&out, ".config"))?;
            Ok(json!({"command": "reduce", "n": waj.n(), "sigma": waj.sigma, "tests": reports.len(), "out": out, "trace": trace}))
        }
        Command::Fit { input, d, lambda, select, out } => {
            let cloud = load(&input, LoadOptions::default())?;
            let opts = cfg.pme(d);
            std::fs::create_dir_all(&out).map_err(pme::Error::from)?;
            let mut summary = json!({"command": "fit", "d": d, "out": out});
            let fit = if select {
                let sel = select_lambda(&cloud.points, &opts, &cfg.lambda_grid)?;
                let mut csv = String::from("index,lambda,test_msd\n");
                for (k, (l, s)) in cfg.lambda_grid.iter().zip(&sel.scores).enumerate() {
                    csv.push_str(&format!("{k},{l},{}\n", s.map_or("nan".to_string(), |v| v.to_string())));
                }
                std::fs::write(out.join("selection.csv"), csv).map_err(pme::Error::from)?;
                summary["index"] = json!(sel.index);
                summary["log_lambda"] = json!(sel.lambda.ln());
                sel.fit
            } else {
                pme_fit(&cloud.points, lambda.expect("clap enforces lambda or select"), &opts)?
            };
            io::write_fit(&fit, out.join("fit.txt"))?;
            io::write_spline(&fit.f, out.join("map.txt"))?;
            dump_config(&cfg, &out.join("config.txt"))?;
            summary["lambda"] = json!(fit.lambda);
            summary["msd"] = json!(fit.msd);
            summary["n_iter"] = json!(fit.n_iter);
            summary["converged"] = json!(fit.converged);
            Ok(summary)
        }
        Command::FitClosed { input, d, lambda, mesh, out, .. } => {
            let cloud = load(&input, LoadOptions::default())?;
            let cf = fit_closed(&cloud.points, &cfg.closed(d, lambda))?;
            io::write_closed_fit(&cf, &out)?;
            if let Some(res) = mesh {
                for (k, m) in io::closed_fit_meshes(&cf, res, &cfg.projection())?.iter().enumerate() {
                    m.write(out.join(format!("glue_{k}.obj")))?;
                }
            }
            dump_config(&cfg, &out.join("config.txt"))?;
            Ok(json!({
                "command": "fit-closed",
                "pieces": cf.len(),
                "g": cf.junctions.iter().map(|j| j.g + 1).collect::<Vec<_>>(),
                "lambda": cf.info.iter().map(|i| i.lambda).collect::<Vec<_>>(),
                "msd": cf.info.iter().map(|i| i.msd).collect::<Vec<_>>(),
                "converged": cf.info.iter().all(|i| i.converged),
                "out": out,
            }))
        }
        Command::Interior { model, reference, grid, naive, input, out } => {
            let labels = if naive {
                let path = input.expect("clap enforces --in with --naive");
                let cloud = load(&path, LoadOptions { slice_column: true })?;
                let (grid, slices) = slice_grid(&cloud, &grid)?;
                naive_slice_interior(&cloud, &grid, &slices)?
            } else {
                let model = model.expect("clap enforces --model");
                let cf = io::read_closed_fit(&model).map_err(at(&model))?;
                let reference = parse_list(&reference.expect("clap enforces --ref"), "ref")?;
                let (bounds, res) = parse_grid_spec(&grid, reference.len())?;
                let grid = regular_grid(&bounds, &res)?;
                classify_grid(&cf, &reference, &grid, &cfg.projection())?
            };
            io::write_labels(&labels, &out)?;
            dump_config(&cfg, &sidecar(&out, ".config"))?;
            let interior = labels.labels.iter().filter(|l| **l == pme::dataset::Side::Interior).count();
            Ok(json!({
                "command": "interior",
                "points": labels.len(),
                "interior": interior,
                "box_reject": labels.count(Provenance::BoxReject),
                "knn_fallback": labels.count(Provenance::KnnFallback),
                "out": out,
            }))
        }
        Command::Benchmark { suite, runs, n, full, out } => {
            std::fs::create_dir_all(&out).map_err(pme::Error::from)?;
            dump_config(&cfg, &out.join("config.txt"))?;
            bench::run(suite, runs, n, full, &cfg, &out)
        }
    }
}

/// Grid for the slice scan: a 2-D `lo:hi:n` spec laid on every slice at the
/// slice's mean height.
fn slice_grid(cloud: &PointCloud, spec: &str) -> Result<(Points, Vec<i64>)> {
    let (bounds, res) = parse_grid_spec(spec, 2)?;
    let plane = regular_grid(&bounds, &res)?;
    let slices = cloud.slice.as_ref().expect("loaded with a slice column");
    let mut ids: Vec<i64> = slices.clone();
    ids.sort_unstable();
    ids.dedup();
    let dim = cloud.dim();
    let mut pts = Points::empty(dim);
    let mut tags = Vec::new();
    for id in ids {
        let rows: Vec<usize> = (0..cloud.len()).filter(|&i| slices[i] == id).collect();
        let rest: Vec<f64> = (2..dim)
            .map(|a| rows.iter().map(|&i| cloud.points.row(i)[a]).sum::<f64>() / rows.len() as f64)
            .collect();
        for p in plane.rows() {
            let mut row = p.to_vec();
            row.extend_from_slice(&rest);
            pts.push(&row);
            tags.push(id);
        }
    }
    Ok((pts, tags))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            println!("{}", json!({"error": e.to_string(), "exit_code": e.exit_code()}));
            ExitCode::from(e.exit_code())
        }
    }
}
