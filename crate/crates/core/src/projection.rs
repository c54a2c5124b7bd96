//! Projection index: the parameter of the nearest point on an embedded
//! manifold, with a lexicographic-largest rule among (near) ties.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::Points;

/// A smooth map `R^d -> R^D` that can be projected onto.
pub trait Embedding: Sync {
    fn intrinsic_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn eval_into(&self, t: &[f64], out: &mut [f64]);
    /// Value and row-major `D × d` Jacobian (`jac[l * d + k] = ∂f_l/∂t_k`).
    fn value_and_jacobian(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]);
    /// Search box used when the options do not give one.
    fn default_box(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOptions {
    /// Search box in parameter space; `None` uses the map's default box.
    pub bbox: Option<Vec<(f64, f64)>>,
    /// Coarse grid nodes per axis; `None` picks 30, 15, 8 for `d` = 1, 2, 3.
    pub grid0: Option<usize>,
    /// Step tolerance in parameter space; `None` is `1e-8 ·` box diameter.
    pub refine_tol: Option<f64>,
    /// Relative distance tolerance under which two local minima tie.
    pub tie_rel: f64,
    pub max_iter: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            bbox: None,
            grid0: None,
            refine_tol: None,
            tie_rel: 1e-6,
            max_iter: 200,
        }
    }
}

impl ProjectionOptions {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.grid0, Some(g) if g < 2) {
            return Err(Error::invalid("grid0 must be at least 2"));
        }
        if matches!(self.refine_tol, Some(t) if !(t > 0.0)) || !(self.tie_rel > 0.0) {
            return Err(Error::invalid("projection tolerances must be positive"));
        }
        if let Some(b) = &self.bbox {
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(Error::invalid("projection box bounds must be finite with lo <= hi"));
            }
        }
        Ok(())
    }
}

pub fn default_grid0(d: usize) -> usize {
    match d {
        1 => 30,
        2 => 15,
        _ => 8,
    }
}

/// A projection result: parameter, foot point and squared distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub t: Vec<f64>,
    pub foot: Vec<f64>,
    pub dist2: f64,
}

impl Projection {
    pub fn dist(&self) -> f64 {
        self.dist2.sqrt()
    }
}

/// Projects onto one map, reusing the coarse-grid evaluations across calls.
pub struct Projector<'a, F: Embedding + ?Sized> {
    f: &'a F,
    bbox: Vec<(f64, f64)>,
    grid0: usize,
    refine_tol: f64,
    tie_rel: f64,
    max_iter: usize,
    /// Grid parameters, row-major `M × d`.
    nodes: Vec<f64>,
    /// `f` at the grid nodes, row-major `M × D`.
    values: Vec<f64>,
    /// Per node, an upper estimate of how far `f` moves within the grid cell
    /// centred on it.
    reach: Vec<f64>,
}

/// All offsets in `{-1, 0, 1}^d`.
fn unit_offsets(d: usize) -> Vec<Vec<isize>> {
    let mut offsets: Vec<Vec<isize>> = vec![vec![]];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (-1..=1).map(move |s| {
                    let mut o = o.clone();
                    o.push(s);
                    o
                })
            })
            .collect();
    }
    offsets
}

/// Grid indices of node `i` and its in-range neighbors.
fn neighborhood(i: usize, g: usize, d: usize, offsets: &[Vec<isize>]) -> impl Iterator<Item = usize> + '_ {
    let g = g as isize;
    let coords: Vec<isize> = (0..d).map(|k| (i as isize / g.pow(k as u32)) % g).collect();
    offsets.iter().filter_map(move |o| {
        let mut j = 0isize;
        for k in 0..d {
            let c = coords[k] + o[k];
            if c < 0 || c >= g {
                return None;
            }
            j += c * g.pow(k as u32);
        }
        Some(j as usize)
    })
}

impl<'a, F: Embedding + ?Sized> Projector<'a, F> {
    pub fn new(f: &'a F, opts: &ProjectionOptions) -> Result<Self> {
        opts.validate()?;
        let d = f.intrinsic_dim();
        let dim = f.ambient_dim();
        let bbox = match &opts.bbox {
            Some(b) => b.clone(),
            None => f.default_box().ok_or_else(|| {
                Error::invalid("no projection box given and the map has no default")
            })?,
        };
        if bbox.len() != d {
            return Err(Error::invalid(format!(
                "projection box has {} axes, map has {d}",
                bbox.len()
            )));
        }
        let grid0 = opts.grid0.unwrap_or_else(|| default_grid0(d));
        let diam = bbox.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt();
        let refine_tol = opts.refine_tol.unwrap_or((1e-8 * diam).max(1e-300));
        let m = grid0.pow(d as u32);
        let mut nodes = Vec::with_capacity(m * d);
        let mut idx = vec![0usize; d];
        for _ in 0..m {
            for k in 0..d {
                let (lo, hi) = bbox[k];
                nodes.push(lo + (hi - lo) * idx[k] as f64 / (grid0 - 1) as f64);
            }
            for k in 0..d {
                idx[k] += 1;
                if idx[k] < grid0 {
                    break;
                }
                idx[k] = 0;
            }
        }
        let values: Vec<f64> = nodes
            .par_chunks(d)
            .flat_map_iter(|t| {
                let mut v = vec![0.0; dim];
                f.eval_into(t, &mut v);
                v
            })
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("map is not finite on the projection grid"));
        }
        // Frobenius norm of the jacobian at each node bounds its spectral norm
        let slope: Vec<f64> = nodes
            .par_chunks(d)
            .map(|t| {
                let mut v = vec![0.0; dim];
                let mut jac = vec![0.0; dim * d];
                f.value_and_jacobian(t, &mut v, &mut jac);
                jac.iter().map(|j| j * j).sum::<f64>().sqrt()
            })
            .collect();
        let half_cell = 0.5
            * bbox
                .iter()
                .map(|(lo, hi)| ((hi - lo) / (grid0 - 1) as f64).powi(2))
                .sum::<f64>()
                .sqrt();
        let offsets = unit_offsets(d);
        let reach = (0..m)
            .map(|i| {
                let lip = neighborhood(i, grid0, d, &offsets).map(|j| slope[j]).fold(0.0, f64::max);
                1.25 * lip * half_cell
            })
            .collect();
        Ok(Self {
            f,
            bbox,
            grid0,
            refine_tol,
            tie_rel: opts.tie_rel,
            max_iter: opts.max_iter,
            nodes,
            values,
            reach,
        })
    }

    pub fn bbox(&self) -> &[(f64, f64)] {
        &self.bbox
    }

    fn nearest_node(&self, t: &[f64]) -> usize {
        let g = self.grid0;
        let mut idx = 0;
        for (k, (&v, &(lo, hi))) in t.iter().zip(&self.bbox).enumerate() {
            let c = if hi > lo { ((v - lo) / (hi - lo) * (g - 1) as f64).round() } else { 0.0 };
            idx += (c.clamp(0.0, (g - 1) as f64) as usize) * g.pow(k as u32);
        }
        idx
    }

    /// Squared distances from `x` to the grid values, and the indices of
    /// nodes no farther than any of their grid neighbors plus the global best.
    fn starts(&self, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let d = self.f.intrinsic_dim();
        let dim = x.len();
        let d2: Vec<f64> = self
            .values
            .chunks_exact(dim)
            .map(|v| crate::points::dist2(v, x))
            .collect();
        let offsets = unit_offsets(d);
        let mut out: Vec<usize> = (0..d2.len())
            .filter(|&i| neighborhood(i, self.grid0, d, &offsets).all(|j| d2[j] >= d2[i]))
            .collect();
        let best = d2
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if !out.contains(&best) {
            out.push(best);
        }
        (d2, out)
    }

    /// Bounded Levenberg–Marquardt descent of `‖f(t) − x‖²` from `t0`.
    fn descend(&self, x: &[f64], t0: &[f64]) -> Result<Projection> {
        let d = t0.len();
        let dim = x.len();
        let mut t = t0.to_vec();
        let mut val = vec![0.0; dim];
        let mut jac = vec![0.0; dim * d];
        self.f.value_and_jacobian(&t, &mut val, &mut jac);
        if !crate::points::dist2(&val, x).is_finite() {
            return Err(Error::numerical("non-finite map value during projection"));
        }
        let mut mu = 1e-3;
        let mut cand = vec![0.0; d];
        let mut cval = vec![0.0; dim];
        let mut cjac = vec![0.0; dim * d];
        for _ in 0..self.max_iter {
            // normal equations JᵀJ δ = −Jᵀr
            let mut a = [[0.0; 3]; 3];
            let mut g = [0.0; 3];
            for l in 0..dim {
                let r = val[l] - x[l];
                for p in 0..d {
                    g[p] += jac[l * d + p] * r;
                    for q in 0..d {
                        a[p][q] += jac[l * d + p] * jac[l * d + q];
                    }
                }
            }
            let scale = (0..d).map(|p| a[p][p]).fold(0.0_f64, f64::max).max(1e-300);
            // the residual curvature term Σ r_l ∇²f_l from forward differences
            // of the jacobian; without it the iteration converges only linearly
            // when x is far from the image relative to its radius of curvature
            let mut curv = [[0.0; 3]; 3];
            for q in 0..d {
                let (lo, hi) = self.bbox[q];
                let h = 1e-7 * (hi - lo).max(1e-12);
                let h = if t[q] + h <= hi { h } else { -h };
                cand.copy_from_slice(&t);
                cand[q] += h;
                self.f.value_and_jacobian(&cand, &mut cval, &mut cjac);
                for l in 0..dim {
                    let r = val[l] - x[l];
                    for p in 0..d {
                        curv[p][q] += r * (cjac[l * d + p] - jac[l * d + p]) / h;
                    }
                }
            }
            for p in 0..d {
                for q in 0..d {
                    a[p][q] += 0.5 * (curv[p][q] + curv[q][p]);
                }
            }
            let mut improved = false;
            let mut step_len = 0.0;
            for _ in 0..40 {
                let mut m = a;
                for p in 0..d {
                    m[p][p] += mu * scale;
                }
                // with the curvature term the damped matrix can be indefinite
                let Some(delta) = solve_small(&m, &g, d).filter(|dl| (0..d).map(|k| dl[k] * g[k]).sum::<f64>() >= 0.0)
                else {
                    mu *= 10.0;
                    continue;
                };
                step_len = 0.0;
                for k in 0..d {
                    let (lo, hi) = self.bbox[k];
                    cand[k] = (t[k] - delta[k]).clamp(lo, hi);
                    step_len += (cand[k] - t[k]).powi(2);
                }
                step_len = step_len.sqrt();
                if step_len == 0.0 {
                    break;
                }
                self.f.value_and_jacobian(&cand, &mut cval, &mut cjac);
                if !cval.iter().all(|v| v.is_finite()) {
                    return Err(Error::numerical("non-finite map value during projection"));
                }
                // the change computed directly keeps its sign when both
                // values round to the same float
                let change: f64 = (0..dim)
                    .map(|l| (cval[l] - val[l]) * (cval[l] + val[l] - 2.0 * x[l]))
                    .sum();
                if change < 0.0 {
                    std::mem::swap(&mut t, &mut cand);
                    std::mem::swap(&mut val, &mut cval);
                    std::mem::swap(&mut jac, &mut cjac);
                    mu = (mu * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
                if step_len <= self.refine_tol {
                    break;
                }
                mu *= 10.0;
            }
            if !improved || step_len <= self.refine_tol {
                break;
            }
        }
        Ok(Projection {
            dist2: crate::points::dist2(&val, x),
            t,
            foot: val,
        })
    }

    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        if x.len() != self.f.ambient_dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, map has {}",
                x.len(),
                self.f.ambient_dim()
            )));
        }
        let d = self.f.intrinsic_dim();
        let (d2, starts) = self.starts(x);
        let mut found: Vec<Projection> = Vec::new();
        for &i in &starts {
            found.push(self.descend(x, &self.nodes[i * d..(i + 1) * d])?);
        }
        let mut best_dist = found.iter().map(|p| p.dist2).fold(f64::INFINITY, f64::min).sqrt();
        // A cell whose lower bound beats the best so far may hold a basin that
        // no discrete minimum led into. Cells next to a minimum already found
        // are taken as its basin.
        let offsets = unit_offsets(d);
        let mut covered = vec![false; d2.len()];
        let cover = |t: &[f64], covered: &mut Vec<bool>| {
            for j in neighborhood(self.nearest_node(t), self.grid0, d, &offsets) {
                covered[j] = true;
            }
        };
        for &i in &starts {
            covered[i] = true;
        }
        for p in &found {
            cover(&p.t, &mut covered);
        }
        let mut open: Vec<(f64, usize)> = d2
            .iter()
            .enumerate()
            .map(|(i, v)| (v.sqrt() - self.reach[i], i))
            .filter(|&(lb, i)| !covered[i] && lb < best_dist)
            .collect();
        open.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lb, i) in open {
            if lb >= best_dist * (1.0 + self.tie_rel) {
                break;
            }
            if covered[i] {
                continue;
            }
            let p = self.descend(x, &self.nodes[i * d..(i + 1) * d])?;
            best_dist = best_dist.min(p.dist2.sqrt());
            covered[i] = true;
            cover(&p.t, &mut covered);
            found.push(p);
        }
        let tie = (self.tie_rel * best_dist).max(1e-300);
        found
            .into_iter()
            .filter(|p| p.dist2.sqrt() <= best_dist + tie)
            .max_by(|a, b| {
                a.t.iter()
                    .zip(&b.t)
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::numerical("projection produced no candidate"))
    }

    /// Projects every row of `xs` (in parallel).
    pub fn project_all(&self, xs: &Points) -> Result<Vec<Projection>> {
        xs.as_slice()
            .par_chunks(xs.dim())
            .map(|x| self.project(x))
            .collect()
    }
}

/// Solves the `d × d` system `m δ = g` by Gaussian elimination with partial
/// pivoting; `None` if singular.
fn solve_small(m: &[[f64; 3]; 3], g: &[f64; 3], d: usize) -> Option<[f64; 3]> {
    let mut a = *m;
    let mut b = *g;
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[p][c].abs() > 0.0) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..d {
            let f = a[r][c] / a[c][c];
            for k in c..d {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..d).rev() {
        let s: f64 = (c + 1..d).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x[..d].iter().all(|v| v.is_finite()).then_some(x)
}

/// `π_f(x)`.
pub fn project<F: Embedding + ?Sized>(f: &F, x: &[f64], opts: &ProjectionOptions) -> Result<Vec<f64>> {
    Ok(Projector::new(f, opts)?.project(x)?.t)
}

/// `‖x − f(π_f(x))‖`.
pub fn dist<F: Embedding + ?Sized>(f: &F, x: &[f64], opts: &ProjectionOptions) -> Result<f64> {
    Ok(Projector::new(f, opts)?.project(x)?.dist())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line;
    impl Embedding for Line {
        fn intrinsic_dim(&self) -> usize {
            1
        }
        fn ambient_dim(&self) -> usize {
            2
        }
        fn eval_into(&self, t: &[f64], out: &mut [f64]) {
            out[0] = t[0];
            out[1] = 0.0;
        }
        fn value_and_jacobian(&self, t: &[f64], v: &mut [f64], j: &mut [f64]) {
            self.eval_into(t, v);
            j[0] = 1.0;
            j[1] = 0.0;
        }
    }

    struct Semicircle;
    impl Embedding for Semicircle {
        fn intrinsic_dim(&self) -> usize {
            1
        }
        fn ambient_dim(&self) -> usize {
            2
        }
        fn eval_into(&self, t: &[f64], out: &mut [f64]) {
            out[0] = t[0].cos();
            out[1] = t[0].sin();
        }
        fn value_and_jacobian(&self, t: &[f64], v: &mut [f64], j: &mut [f64]) {
            self.eval_into(t, v);
            j[0] = -t[0].sin();
            j[1] = t[0].cos();
        }
        fn default_box(&self) -> Option<Vec<(f64, f64)>> {
            Some(vec![(0.0, std::f64::consts::PI)])
        }
    }

    #[test]
    fn line_projection_is_first_coordinate() {
        let opts = ProjectionOptions {
            bbox: Some(vec![(-10.0, 10.0)]),
            ..Default::default()
        };
        for x in [[0.3, 2.0], [-4.1, -1.0], [9.99, 0.0]] {
            let t = project(&Line, &x, &opts).unwrap();
            assert!((t[0] - x[0]).abs() < 1e-9, "{t:?} {x:?}");
        }
    }

    #[test]
    fn semicircle_center_takes_the_largest_parameter() {
        let t = project(&Semicircle, &[0.0, 0.0], &ProjectionOptions::default()).unwrap();
        assert_eq!(t[0], std::f64::consts::PI);
    }

    #[test]
    fn below_the_semicircle_ties_break_upward() {
        // on the negative y-axis both endpoints are equally near
        for y in [-0.2, -1.0, -3.0] {
            let t = project(&Semicircle, &[0.0, y], &ProjectionOptions::default()).unwrap();
            assert_eq!(t[0], std::f64::consts::PI, "y = {y}");
        }
    }

    #[test]
    fn points_on_the_curve_have_zero_distance() {
        for t0 in [0.1, 1.0, 2.5] {
            let x = [f64::cos(t0), f64::sin(t0)];
            assert!(dist(&Semicircle, &x, &ProjectionOptions::default()).unwrap() < 1e-6);
        }
    }

    #[test]
    fn small_solver() {
        let m = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve_small(&m, &[3.0, 5.0, 5.0], 3).unwrap();
        for (a, b) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(solve_small(&[[0.0; 3]; 3], &[1.0, 0.0, 0.0], 2).is_none());
    }
}
