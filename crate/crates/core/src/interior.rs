//! Inside/outside labels: orientation signs against fitted pieces, and a
//! slice-by-slice polygon scan for comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::{PointCloud, Side};
use crate::error::{Error, Result};
use crate::gluing::ClosedFit;
use crate::points::{dist2, Points};
use crate::projection::{Embedding, ProjectionOptions, Projector};

/// Normal vector of the image of `f` at `t` for `(d, D)` = (1, 2) or (2, 3).
pub fn normal<F: Embedding + ?Sized>(f: &F, t: &[f64]) -> Result<Vec<f64>> {
    let (d, dim) = (f.intrinsic_dim(), f.ambient_dim());
    let mut value = vec![0.0; dim];
    let mut jac = vec![0.0; dim * d];
    match (d, dim) {
        (1, 2) => {
            f.value_and_jacobian(t, &mut value, &mut jac);
            Ok(vec![-jac[1], jac[0]])
        }
        (2, 3) => {
            f.value_and_jacobian(t, &mut value, &mut jac);
            // jac[l * 2 + k] = ∂f_l/∂t_k
            let p = |l: usize, k: usize| jac[l * 2 + k];
            Ok(vec![
                p(1, 0) * p(2, 1) - p(2, 0) * p(1, 1),
                p(2, 0) * p(0, 1) - p(0, 0) * p(2, 1),
                p(0, 0) * p(1, 1) - p(1, 0) * p(0, 1),
            ])
        }
        _ => Err(Error::Unsupported(format!(
            "normals are defined for (d, D) = (1, 2) or (2, 3), got ({d}, {dim})"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationResult {
    /// −1, 0 or +1; 0 when the point is on the manifold or the normal vanishes.
    pub sign: i8,
    pub foot: Vec<f64>,
    pub t: Vec<f64>,
    pub normal: Vec<f64>,
}

impl OrientationResult {
    pub fn degenerate(&self) -> bool {
        self.normal.iter().all(|v| *v == 0.0)
    }
}

fn orient_at<F: Embedding + ?Sized>(f: &F, t: Vec<f64>, foot: Vec<f64>, xi: &[f64]) -> Result<OrientationResult> {
    let n = normal(f, &t)?;
    let diff: Vec<f64> = foot.iter().zip(xi).map(|(a, b)| a - b).collect();
    let inner: f64 = diff.iter().zip(&n).map(|(a, b)| a * b).sum();
    let dn = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = xi
        .iter()
        .chain(&foot)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let sign = if dn <= 1e-9 * scale || inner.abs() <= 1e-9 * dn * nn {
        0
    } else if inner > 0.0 {
        1
    } else {
        -1
    };
    Ok(OrientationResult {
        sign,
        foot,
        t,
        normal: n,
    })
}

fn orient_with<F: Embedding + ?Sized>(p: &Projector<'_, F>, f: &F, xi: &[f64]) -> Result<OrientationResult> {
    let q = p.project(xi)?;
    orient_at(f, q.t, q.foot, xi)
}

/// Sign of `(f(π_f(ξ)) − ξ)ᵀ n(π_f(ξ))`.
pub fn orientation<F: Embedding + ?Sized>(f: &F, xi: &[f64], opts: &ProjectionOptions) -> Result<OrientationResult> {
    let p = Projector::new(f, opts)?;
    orient_with(&p, f, xi)
}

/// Whether `xi` lies on the same side of `f` as the reference point.
pub fn same_side<F: Embedding + ?Sized>(f: &F, xi: &[f64], reference: &[f64], opts: &ProjectionOptions) -> Result<bool> {
    let p = Projector::new(f, opts)?;
    let a = orient_with(&p, f, xi)?.sign;
    let b = orient_with(&p, f, reference)?.sign;
    Ok(a as i32 * b as i32 > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Outside every sector box.
    BoxReject,
    /// Interior with respect to both pieces of its junction.
    ScenarioI,
    /// Exterior with respect to both pieces.
    ScenarioII,
    /// Pieces disagree; decided by the 10 nearest decided points.
    KnnFallback,
    SliceScan,
    /// The scan line kept an odd number of crossings after one perturbation.
    SliceDegenerate,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::BoxReject => "box-reject",
            Provenance::ScenarioI => "scenario-i",
            Provenance::ScenarioII => "scenario-ii",
            Provenance::KnnFallback => "knn-fallback",
            Provenance::SliceScan => "slice-scan",
            Provenance::SliceDegenerate => "slice-degenerate",
        }
    }

    /// Whether the label came from the method itself rather than a default.
    pub fn is_decided(self) -> bool {
        !matches!(self, Provenance::BoxReject | Provenance::SliceDegenerate)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "box-reject" => Provenance::BoxReject,
            "scenario-i" => Provenance::ScenarioI,
            "scenario-ii" => Provenance::ScenarioII,
            "knn-fallback" => Provenance::KnnFallback,
            "slice-scan" => Provenance::SliceScan,
            "slice-degenerate" => Provenance::SliceDegenerate,
            _ => return Err(Error::invalid(format!("unknown provenance '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridLabels {
    pub points: Points,
    pub labels: Vec<Side>,
    pub provenance: Vec<Provenance>,
}

impl GridLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, p: Provenance) -> usize {
        self.provenance.iter().filter(|&&q| q == p).count()
    }

    /// Share of decided points whose label differs from `truth`.
    pub fn error_rate(&self, truth: &[Side]) -> Result<f64> {
        if truth.len() != self.len() {
            return Err(Error::invalid("truth length differs from the grid"));
        }
        let (mut wrong, mut total) = (0usize, 0usize);
        for ((l, p), t) in self.labels.iter().zip(&self.provenance).zip(truth) {
            if p.is_decided() {
                total += 1;
                wrong += (l != t) as usize;
            }
        }
        if total == 0 {
            return Err(Error::degenerate("no decided grid points"));
        }
        Ok(wrong as f64 / total as f64)
    }
}

/// A regular grid over an axis-aligned box, `res` nodes per axis (row-major,
/// last axis fastest).
pub fn regular_grid(bounds: &[(f64, f64)], res: &[usize]) -> Result<Points> {
    if bounds.len() != res.len() || bounds.is_empty() {
        return Err(Error::invalid("grid bounds and resolution must have the same nonzero length"));
    }
    if res.iter().any(|&r| r == 0) || bounds.iter().any(|(a, b)| !(a <= b)) {
        return Err(Error::invalid("grid needs positive resolution and lo <= hi"));
    }
    let dim = bounds.len();
    let total: usize = res.iter().product();
    let mut data = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for a in 0..dim {
            let (lo, hi) = bounds[a];
            let v = if res[a] == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * idx[a] as f64 / (res[a] - 1) as f64
            };
            data.push(v);
        }
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < res[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Points::new(dim, data)
}

fn in_box(x: &[f64], b: &[(f64, f64)]) -> bool {
    x.iter().zip(b).all(|(v, (lo, hi))| v >= lo && v <= hi)
}

/// Labels grid points against a closed fit with interior reference `c_star`.
pub fn classify_grid(cf: &ClosedFit, c_star: &[f64], grid: &Points, opts: &ProjectionOptions) -> Result<GridLabels> {
    let n = cf.len();
    if n == 0 {
        return Err(Error::invalid("closed fit has no pieces"));
    }
    let dim = cf.pieces[0].ambient_dim();
    if grid.dim() != dim || c_star.len() != dim {
        return Err(Error::invalid("grid and reference dimensions must match the fit"));
    }
    let projectors: Vec<Projector<'_, _>> = cf
        .pieces
        .iter()
        .map(|f| Projector::new(f, opts))
        .collect::<Result<_>>()?;
    let ref_sign: Vec<i8> = cf
        .pieces
        .iter()
        .zip(&projectors)
        .map(|(f, p)| orient_with(p, f, c_star).map(|o| o.sign))
        .collect::<Result<_>>()?;
    if let Some(k) = ref_sign.iter().position(|&s| s == 0) {
        return Err(Error::degenerate(format!("reference point lies on piece {k}")));
    }
    let centers: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            cf.overlap_box(k)
                .iter()
                .map(|(a, b)| 0.5 * (a + b))
                .collect()
        })
        .collect();
    // (label, provenance, junction) per grid point; KnnFallback rows are
    // resolved afterwards.
    let first: Vec<(Side, Provenance, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<(Side, Provenance, usize)> {
            let x = grid.row(i);
            if !cf.sector_boxes.iter().any(|b| in_box(x, b)) {
                return Ok((Side::Exterior, Provenance::BoxReject, usize::MAX));
            }
            let Some(k) = (0..n)
                .filter(|&k| in_box(x, cf.overlap_box(k)))
                .min_by(|&a, &b| dist2(x, &centers[a]).total_cmp(&dist2(x, &centers[b])))
            else {
                // inside a sector box but no overlap box
                return Ok((Side::Exterior, Provenance::BoxReject, usize::MAX));
            };
            let k2 = (k + 1) % n;
            let s1 = orient_with(&projectors[k], &cf.pieces[k], x)?.sign as i32 * ref_sign[k] as i32 > 0;
            let s2 = orient_with(&projectors[k2], &cf.pieces[k2], x)?.sign as i32 * ref_sign[k2] as i32 > 0;
            Ok(match (s1, s2) {
                (true, true) => (Side::Interior, Provenance::ScenarioI, k),
                (false, false) => (Side::Exterior, Provenance::ScenarioII, k),
                _ => (Side::Exterior, Provenance::KnnFallback, k),
            })
        })
        .collect::<Result<_>>()?;
    let mut train: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, (_, p, k)) in first.iter().enumerate() {
        if matches!(p, Provenance::ScenarioI | Provenance::ScenarioII) {
            train[*k].push(i);
        }
    }
    let resolved: Vec<Side> = first
        .par_iter()
        .enumerate()
        .map(|(i, (side, p, k))| -> Result<Side> {
            if *p != Provenance::KnnFallback {
                return Ok(*side);
            }
            let pool = &train[*k];
            if pool.is_empty() {
                return Err(Error::degenerate(format!(
                    "junction {k} has undecided grid points but no decided ones to vote"
                )));
            }
            let x = grid.row(i);
            let mut near: Vec<(f64, usize)> = pool.iter().map(|&q| (dist2(x, grid.row(q)), q)).collect();
            let m = near.len().min(10);
            near.select_nth_unstable_by(m - 1, |a, b| a.0.total_cmp(&b.0));
            let votes = near[..m]
                .iter()
                .filter(|&&(_, q)| first[q].0 == Side::Interior)
                .count();
            // ties go to exterior
            Ok(if 2 * votes > m { Side::Interior } else { Side::Exterior })
        })
        .collect::<Result<_>>()?;
    Ok(GridLabels {
        points: grid.clone(),
        labels: resolved,
        provenance: first.into_iter().map(|(_, p, _)| p).collect(),
    })
}

/// Crossing heights of the vertical line `x = x0` with a closed polygon.
fn crossings(poly: &[[f64; 2]], x0: f64) -> Vec<f64> {
    let mut ys = Vec::new();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        // half-open in x so a shared vertex is counted once
        if (a[0] <= x0) != (b[0] <= x0) {
            let s = (x0 - a[0]) / (b[0] - a[0]);
            ys.push(a[1] + s * (b[1] - a[1]));
        }
    }
    ys.sort_by(f64::total_cmp);
    ys
}

/// Slice boundary as a polygon: points sorted by angle about their centroid.
pub fn slice_polygon(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut poly = points.to_vec();
    poly.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    poly
}

/// Label of `(x, y)` from the crossings of its vertical line with `poly`;
/// `None` when the crossing count stays odd.
pub fn scan_label(poly: &[[f64; 2]], x: f64, y: f64, extent: f64) -> Option<Side> {
    let mut ys = crossings(poly, x);
    if ys.len() % 2 == 1 {
        ys = crossings(poly, x + 1e-9 * extent);
        if ys.len() % 2 == 1 {
            return None;
        }
    }
    let inside = ys.chunks(2).any(|c| y >= c[0] && y <= c[1]);
    Some(if inside { Side::Interior } else { Side::Exterior })
}

/// Slice-by-slice scan. `cloud` holds boundary points tagged with a slice
/// index; the slice plane is spanned by the first two coordinates. Each grid
/// point is tested against the polygon of its own slice.
pub fn naive_slice_interior(cloud: &PointCloud, grid: &Points, grid_slices: &[i64]) -> Result<GridLabels> {
    let slices = cloud
        .slice
        .as_ref()
        .ok_or_else(|| Error::invalid("boundary points carry no slice index"))?;
    if cloud.dim() < 2 || grid.dim() != cloud.dim() {
        return Err(Error::invalid("grid and boundary dimensions must match and be at least 2"));
    }
    if grid_slices.len() != grid.len() {
        return Err(Error::invalid("one slice index per grid point is required"));
    }
    let mut by_slice: BTreeMap<i64, Vec<[f64; 2]>> = BTreeMap::new();
    for (row, &s) in cloud.points.rows().zip(slices) {
        by_slice.entry(s).or_default().push([row[0], row[1]]);
    }
    let polys: BTreeMap<i64, (Vec<[f64; 2]>, f64)> = by_slice
        .into_iter()
        .map(|(s, pts)| {
            let poly = slice_polygon(&pts);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for p in &poly {
                lo = lo.min(p[0]);
                hi = hi.max(p[0]);
            }
            (s, (poly, (hi - lo).max(f64::MIN_POSITIVE)))
        })
        .collect();
    let mut labels = Vec::with_capacity(grid.len());
    let mut provenance = Vec::with_capacity(grid.len());
    for (row, s) in grid.rows().zip(grid_slices) {
        let out = match polys.get(s) {
            Some((poly, extent)) if poly.len() >= 3 => scan_label(poly, row[0], row[1], *extent),
            _ => Some(Side::Exterior),
        };
        match out {
            Some(side) => {
                labels.push(side);
                provenance.push(Provenance::SliceScan);
            }
            None => {
                labels.push(Side::Exterior);
                provenance.push(Provenance::SliceDegenerate);
            }
        }
    }
    Ok(GridLabels {
        points: grid.clone(),
        labels,
        provenance,
    })
}

/// Share of matching labels among grid points decided by both methods.
pub fn agreement(a: &GridLabels, b: &GridLabels) -> Result<f64> {
    if a.points != b.points {
        return Err(Error::invalid("label sets are on different grids"));
    }
    let (mut same, mut total) = (0usize, 0usize);
    for i in 0..a.len() {
        if a.provenance[i].is_decided() && b.provenance[i].is_decided() {
            total += 1;
            same += (a.labels[i] == b.labels[i]) as usize;
        }
    }
    if total == 0 {
        return Err(Error::degenerate("no grid point is decided by both methods"));
    }
    Ok(same as f64 / total as f64)
}
