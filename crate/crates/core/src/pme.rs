//! The projection/adaptation iteration on a weighted average joint, the
//! tuning-parameter search and the one-shot ISOMAP baseline.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hdmde::{hdmde, HdmdeOptions, Waj, ZReport};
use crate::isomap::isomap;
use crate::points::Points;
use crate::projection::{Embedding, ProjectionOptions, Projector};
use crate::spline::{assemble, SplineMap};

#[derive(Debug, Clone, PartialEq)]
pub struct PmeOptions {
    /// Intrinsic dimension.
    pub d: usize,
    pub hdmde: HdmdeOptions,
    /// Relative change of the weighted MSD below which the iteration stops.
    pub eps_star: f64,
    pub max_outer_iter: usize,
    pub projection: ProjectionOptions,
    /// Neighbors for the initial ISOMAP; `None` uses the default rule.
    pub isomap_k: Option<usize>,
}

impl PmeOptions {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            hdmde: HdmdeOptions::default(),
            eps_star: 1e-3,
            max_outer_iter: 100,
            projection: ProjectionOptions::default(),
            isomap_k: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Unsupported(format!(
                "intrinsic dimension {} (only 1, 2, 3)",
                self.d
            )));
        }
        if !(self.eps_star > 0.0) || self.max_outer_iter == 0 {
            return Err(Error::invalid("eps_star and max_outer_iter must be positive"));
        }
        self.hdmde.validate()?;
        self.projection.validate()
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub f: SplineMap,
    pub lambda: f64,
    /// Test MSD on the raw data.
    pub msd: f64,
    /// Weighted MSD of the nodes, one entry per fitted map.
    pub weighted_msd_trace: Vec<f64>,
    /// Number of projection/adaptation rounds after the initial solve.
    pub n_iter: usize,
    pub converged: bool,
    /// Index into `weighted_msd_trace` of the map returned.
    pub returned_iterate: usize,
    /// Set when the iteration stopped for a reason other than convergence.
    pub note: Option<String>,
}

/// Mean squared distance of the rows of `x` to the image of `f`.
pub fn msd<F: Embedding + ?Sized>(f: &F, x: &Points, opts: &ProjectionOptions) -> Result<f64> {
    let p = Projector::new(f, opts)?;
    let proj = p.project_all(x)?;
    Ok(proj.iter().map(|q| q.dist2).sum::<f64>() / x.len() as f64)
}

/// `Σ θ_j ‖μ_j − f(π_f(μ_j))‖²`.
pub fn weighted_msd<F: Embedding + ?Sized>(f: &F, waj: &Waj, opts: &ProjectionOptions) -> Result<f64> {
    let p = Projector::new(f, opts)?;
    let proj = p.project_all(&waj.nodes)?;
    Ok(proj.iter().zip(&waj.theta).map(|(q, t)| t * q.dist2).sum())
}

/// Data reduction and initial parameters, shared by every `λ`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub waj: Waj,
    pub trace: Vec<ZReport>,
    /// ISOMAP parameters of the nodes.
    pub init: Points,
}

pub fn prepare(x: &Points, opts: &PmeOptions) -> Result<Prepared> {
    opts.validate()?;
    if opts.d >= x.dim() {
        return Err(Error::invalid(format!(
            "intrinsic dimension {} must be below the ambient dimension {}",
            opts.d,
            x.dim()
        )));
    }
    let (waj, trace) = hdmde(x, &opts.hdmde)?;
    let init = isomap(&waj.nodes, opts.d, opts.isomap_k)?;
    Ok(Prepared { waj, trace, init })
}

/// Runs the full iteration for one `λ`.
pub fn pme_fit(x: &Points, lambda: f64, opts: &PmeOptions) -> Result<FitResult> {
    let prep = prepare(x, opts)?;
    fit_prepared(x, &prep, lambda, opts)
}

fn project_nodes(f: &SplineMap, waj: &Waj, opts: &ProjectionOptions) -> Result<(Points, f64)> {
    let p = Projector::new(f, opts)?;
    let proj = p.project_all(&waj.nodes)?;
    let d = f.intrinsic_dim();
    let mut knots = Vec::with_capacity(proj.len() * d);
    let mut total = 0.0;
    for (q, t) in proj.iter().zip(&waj.theta) {
        knots.extend_from_slice(&q.t);
        total += t * q.dist2;
    }
    Ok((Points::new(d, knots)?, total))
}

/// The iteration starting from precomputed nodes and initial parameters.
pub fn fit_prepared(x: &Points, prep: &Prepared, lambda: f64, opts: &PmeOptions) -> Result<FitResult> {
    opts.validate()?;
    let waj = &prep.waj;
    let solve = |knots: &Points| -> Result<SplineMap> {
        assemble(knots, &waj.nodes, &waj.theta)?.solve(lambda)
    };
    let mut f = solve(&prep.init).map_err(|e| Error::Iteration {
        iteration: 0,
        source: Box::new(e),
    })?;
    let (mut knots, mut d_prev) = project_nodes(&f, waj, &opts.projection)?;
    let mut trace = vec![d_prev];
    let mut best = (d_prev, 0usize, f.clone());
    let mut converged = false;
    let mut note = None;
    let mut n_iter = 0;
    for it in 1..=opts.max_outer_iter {
        let wrap = |e: Error| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        };
        let next = solve(&knots).map_err(wrap)?;
        let (next_knots, d_next) = project_nodes(&next, waj, &opts.projection).map_err(wrap)?;
        n_iter = it;
        trace.push(d_next);
        f = next;
        knots = next_knots;
        if d_next < best.0 {
            best = (d_next, it, f.clone());
        }
        if d_prev == 0.0 {
            if d_next == 0.0 {
                converged = true;
            } else {
                note = Some("weighted MSD left zero; relative change undefined".into());
            }
            break;
        }
        let rel = ((d_next - d_prev) / d_prev).abs();
        d_prev = d_next;
        if rel < opts.eps_star {
            converged = true;
            break;
        }
    }
    let last = trace.len() - 1;
    let (f, returned) = if trace[last] > 1.1 * best.0 {
        (best.2, best.1)
    } else {
        (f, last)
    };
    if !converged && note.is_none() {
        note = Some(format!(
            "no convergence within {} iterations",
            opts.max_outer_iter
        ));
    }
    let msd = msd(&f, x, &opts.projection)?;
    Ok(FitResult {
        f,
        lambda,
        msd,
        weighted_msd_trace: trace,
        n_iter,
        converged,
        returned_iterate: returned,
        note,
    })
}

/// `{e^k : k = −15, …, 5}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-15..=5).map(|k| (k as f64).exp()).collect()
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub lambda: f64,
    /// Position of the winner in the grid.
    pub index: usize,
    pub fit: FitResult,
    /// Test MSD per grid value, `None` where the fit failed.
    pub scores: Vec<Option<f64>>,
    pub prepared: Prepared,
}

/// Fits every grid value on shared data reduction and returns the one with
/// the smallest test MSD; near ties go to the larger `λ`.
pub fn select_lambda(x: &Points, opts: &PmeOptions, grid: &[f64]) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if let Some(l) = grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!("grid value {l} is not a finite non-negative number")));
    }
    let prep = prepare(x, opts)?;
    let fits: Vec<Result<FitResult>> = grid
        .par_iter()
        .map(|&l| fit_prepared(x, &prep, l, opts))
        .collect();
    let scores: Vec<Option<f64>> = fits.iter().map(|r| r.as_ref().ok().map(|f| f.msd)).collect();
    let best = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        let msgs: Vec<String> = fits
            .iter()
            .zip(grid)
            .filter_map(|(r, l)| r.as_ref().err().map(|e| format!("lambda {l:.3e}: {e}")))
            .collect();
        return Err(Error::numerical(format!(
            "every lambda failed: {}",
            msgs.join("; ")
        )));
    }
    let scale = x.diameter().powi(2);
    let tol = 1e-9 * best + 1e-12 * scale;
    let index = (0..grid.len())
        .filter(|&i| matches!(scores[i], Some(s) if s <= best + tol))
        .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .expect("a finite score exists");
    let fit = fits
        .into_iter()
        .nth(index)
        .expect("index in range")
        .expect("scored fit");
    Ok(Selection {
        lambda: grid[index],
        index,
        fit,
        scores,
        prepared: prep,
    })
}

/// ISOMAP on all raw points, uniform weights, a single solve.
pub fn baseline_isomap_fit(
    x: &Points,
    d: usize,
    lambda: f64,
    k: Option<usize>,
    projection: &ProjectionOptions,
) -> Result<FitResult> {
    let params = isomap(x, d, k)?;
    let w = vec![1.0 / x.len() as f64; x.len()];
    let f = assemble(&params, x, &w)?.solve(lambda)?;
    let msd = msd(&f, x, projection)?;
    Ok(FitResult {
        f,
        lambda,
        msd,
        weighted_msd_trace: vec![msd],
        n_iter: 0,
        converged: true,
        returned_iterate: 0,
        note: None,
    })
}
