//! Closed manifolds as a ring of overlapping open pieces, blended pairwise
//! over their shared data with a smooth weight.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::isomap::isomap;
use crate::linalg::{canonical_signs, sorted_symmetric_eigen};
use crate::pme::{default_lambda_grid, pme_fit, select_lambda, FitResult, PmeOptions};
use crate::points::{dist2, Points};
use crate::projection::{ProjectionOptions, Projector};
use crate::spline::SplineMap;

/// Smoothstep weight: 1 on `(-∞, 0]`, 0 on `[1, ∞)`, `1 − 3z² + 2z³` between.
pub fn kappa(z: f64) -> f64 {
    if z <= 0.0 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        1.0 - 3.0 * z * z + 2.0 * z * z * z
    }
}

/// Rotation, box and gluing axis for one overlap region.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueJunction {
    /// `D × D`; rows are principal axes of the overlap, descending variance.
    pub r: DMatrix<f64>,
    /// Intrinsic dimension of the glued pieces.
    pub d: usize,
    /// Gluing axis, 0-based, `< d`.
    pub g: usize,
    /// Per-axis bounds of the rotated overlap on the first `d` axes.
    pub bounds: Vec<(f64, f64)>,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    /// The overlap points in rotated coordinates (all `D` of them); used to
    /// lift a chart coordinate back into the ambient space.
    pub rotated: Points,
}

impl GlueJunction {
    pub fn ambient_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn b_lower(&self) -> f64 {
        self.bounds[self.g].0
    }

    pub fn b_upper(&self) -> f64 {
        self.bounds[self.g].1
    }

    pub fn rotate(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.ambient_dim();
        (0..dim)
            .map(|l| (0..dim).map(|m| self.r[(l, m)] * x[m]).sum())
            .collect()
    }

    /// Diameter of the chart box.
    pub fn scale(&self) -> f64 {
        self.bounds.iter().map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    /// Blend weight of the first piece at chart coordinate `ζ_g`.
    pub fn weight(&self, zeta_g: f64) -> f64 {
        let (bl, bu) = (self.b_lower(), self.b_upper());
        kappa((zeta_g - (2.0 * bl + bu) / 3.0) / ((bu - bl) / 3.0))
    }

    pub fn contains(&self, zeta: &[f64]) -> bool {
        let tol = 1e-9 * self.scale();
        zeta.iter()
            .zip(&self.bounds)
            .all(|(z, (a, b))| *z >= a - tol && *z <= b + tol)
    }
}

/// Principal axes of `z` as the rows of a `D × D` matrix, with the variances.
fn principal_axes(z: &Points) -> (DMatrix<f64>, Vec<f64>) {
    let dim = z.dim();
    let mean = z.mean();
    let mut cov = DMatrix::zeros(dim, dim);
    for row in z.rows() {
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    cov /= z.len() as f64;
    let (values, mut vectors) = sorted_symmetric_eigen(cov);
    canonical_signs(&mut vectors);
    (vectors.transpose(), values)
}

/// Builds the junction for overlap `z` with anchors `xi1`, `xi2` and gluing
/// axis `g` (0-based).
pub fn build_junction(z: &Points, xi1: &[f64], xi2: &[f64], d: usize, g: usize) -> Result<GlueJunction> {
    let dim = z.dim();
    if d == 0 || d >= dim {
        return Err(Error::invalid(format!("intrinsic dimension {d} must be in 1..{dim}")));
    }
    if g >= d {
        return Err(Error::invalid(format!("gluing axis {g} must be below d = {d}")));
    }
    if z.len() < dim + 1 {
        return Err(Error::invalid(format!(
            "overlap has {} points, need at least {}",
            z.len(),
            dim + 1
        )));
    }
    if xi1.len() != dim || xi2.len() != dim {
        return Err(Error::invalid("anchor dimension does not match the overlap"));
    }
    if xi1 == xi2 {
        return Err(Error::invalid("anchors must differ"));
    }
    let (mut r, values) = principal_axes(z);
    if !(values[d - 1] > 1e-12 * values[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::degenerate(format!(
            "overlap spans fewer than {d} directions (variances {values:?})"
        )));
    }
    let proj = |r: &DMatrix<f64>, x: &[f64]| (0..dim).map(|m| r[(g, m)] * x[m]).sum::<f64>();
    if proj(&r, xi1) > proj(&r, xi2) {
        for m in 0..dim {
            r[(g, m)] = -r[(g, m)];
        }
    }
    let mut rotated = Vec::with_capacity(z.len() * dim);
    for row in z.rows() {
        for l in 0..dim {
            rotated.push((0..dim).map(|m| r[(l, m)] * row[m]).sum());
        }
    }
    let rotated = Points::new(dim, rotated)?;
    let bounds: Vec<(f64, f64)> = rotated.bounds().into_iter().take(d).collect();
    let (bl, bu) = bounds[g];
    if !(bl < bu) {
        return Err(Error::degenerate("overlap has zero extent along the gluing axis"));
    }
    Ok(GlueJunction {
        r,
        d,
        g,
        bounds,
        xi1: xi1.to_vec(),
        xi2: xi2.to_vec(),
        rotated,
    })
}

/// The leading `d` rotated coordinates of `f` as a local coordinate system.
pub struct Chart<'a> {
    f: &'a SplineMap,
    junction: &'a GlueJunction,
    projector: Projector<'a, SplineMap>,
}

impl<'a> Chart<'a> {
    pub fn new(f: &'a SplineMap, junction: &'a GlueJunction, opts: &ProjectionOptions) -> Result<Self> {
        if f.intrinsic_dim() != junction.d || f.ambient_dim() != junction.ambient_dim() {
            return Err(Error::invalid("map and junction dimensions differ"));
        }
        Ok(Self {
            f,
            junction,
            projector: Projector::new(f, opts)?,
        })
    }

    /// An ambient point whose leading rotated coordinates are `ζ`, with the
    /// rest averaged over the 10 overlap points nearest in the chart.
    fn lift(&self, zeta: &[f64]) -> Vec<f64> {
        let j = self.junction;
        let (d, dim) = (j.d, j.ambient_dim());
        let mut near: Vec<(f64, usize)> = j
            .rotated
            .rows()
            .enumerate()
            .map(|(i, row)| (dist2(&row[..d], zeta), i))
            .collect();
        let k = near.len().min(10);
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let mut y = zeta.to_vec();
        for l in d..dim {
            y.push(near[..k].iter().map(|&(_, i)| j.rotated.row(i)[l]).sum::<f64>() / k as f64);
        }
        // back to ambient coordinates: x = Rᵀ y
        (0..dim)
            .map(|m| (0..dim).map(|l| j.r[(l, m)] * y[l]).sum())
            .collect()
    }

    fn residual(&self, t: &[f64], zeta: &[f64], value: &mut [f64], jac: &mut [f64]) -> (Vec<f64>, DMatrix<f64>) {
        let j = self.junction;
        let (d, dim) = (j.d, j.ambient_dim());
        self.f.value_and_jacobian(t, value, jac);
        let r = (0..d)
            .map(|l| (0..dim).map(|m| j.r[(l, m)] * value[m]).sum::<f64>() - zeta[l])
            .collect();
        let jr = DMatrix::from_fn(d, d, |l, k| (0..dim).map(|m| j.r[(l, m)] * jac[m * d + k]).sum());
        (r, jr)
    }

    /// Parameter `t` with `P_d(R f(t)) = ζ`, by damped Newton from the
    /// projection of the lifted point.
    pub fn invert(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        let j = self.junction;
        let (d, dim) = (j.d, j.ambient_dim());
        if zeta.len() != d {
            return Err(Error::invalid("chart coordinate has the wrong length"));
        }
        let scale = j.scale();
        let mut t = self.projector.project(&self.lift(zeta))?.t;
        let mut value = vec![0.0; dim];
        let mut jac = vec![0.0; dim * d];
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (mut r, mut jr) = self.residual(&t, zeta, &mut value, &mut jac);
        let mut rn = norm(&r);
        for _ in 0..100 {
            if rn <= 1e-14 * scale {
                break;
            }
            let jnorm = jr.norm();
            let lu = jr.clone().lu();
            if !(lu.determinant().abs() > 1e-12 * jnorm.powi(d as i32)) {
                return Err(Error::numerical(
                    "chart jacobian is singular; the piece is not a graph over the gluing plane",
                ));
            }
            let step = lu
                .solve(&DVector::from_column_slice(&r))
                .ok_or_else(|| Error::numerical("chart jacobian is singular"))?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = t.iter().zip(step.iter()).map(|(a, s)| a - alpha * s).collect();
                let (r2, jr2) = self.residual(&trial, zeta, &mut value, &mut jac);
                let rn2 = norm(&r2);
                if rn2 < rn {
                    t = trial;
                    r = r2;
                    jr = jr2;
                    rn = rn2;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        // a solution more than a box width outside the piece's knots is
        // extrapolation, not a chart
        if t
            .iter()
            .zip(self.projector.bbox())
            .any(|(v, (lo, hi))| *v < lo - (hi - lo) || *v > hi + (hi - lo))
        {
            return Err(Error::Convergence(
                "chart inverse leaves the piece's parameter box".into(),
            ));
        }
        // a start that already solves the system skips the loop's check
        if !(jr.determinant().abs() > 1e-12 * jr.norm().powi(d as i32)) {
            return Err(Error::numerical(
                "chart jacobian is singular; the piece is not a graph over the gluing plane",
            ));
        }
        if rn <= 1e-8 * scale {
            Ok(t)
        } else {
            Err(Error::Convergence(format!(
                "chart inversion stalled with residual {rn:.3e} (box scale {scale:.3e})"
            )))
        }
    }

    /// `f` at the inverted chart coordinate.
    pub fn branch(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.f.eval(&self.invert(zeta)?))
    }
}

/// Solves `P_d(R f(t)) = ζ` for `t`.
pub fn invert_chart(f: &SplineMap, junction: &GlueJunction, zeta: &[f64], opts: &ProjectionOptions) -> Result<Vec<f64>> {
    Chart::new(f, junction, opts)?.invert(zeta)
}

/// The blend of two pieces over one junction.
pub struct Glue<'a> {
    junction: &'a GlueJunction,
    first: Chart<'a>,
    second: Chart<'a>,
}

impl<'a> Glue<'a> {
    pub fn new(f1: &'a SplineMap, f2: &'a SplineMap, junction: &'a GlueJunction, opts: &ProjectionOptions) -> Result<Self> {
        Ok(Self {
            junction,
            first: Chart::new(f1, junction, opts)?,
            second: Chart::new(f2, junction, opts)?,
        })
    }

    /// `G(ζ) = K(ζ_g) f1(chart₁⁻¹(ζ)) + (1 − K(ζ_g)) f2(chart₂⁻¹(ζ))`. A
    /// branch with zero weight is not evaluated.
    pub fn eval(&self, zeta: &[f64]) -> Result<Vec<f64>> {
        let j = self.junction;
        if zeta.len() != j.d || !j.contains(zeta) {
            return Err(Error::invalid("chart coordinate outside the junction box"));
        }
        let k = j.weight(zeta[j.g]);
        if k == 1.0 {
            return self.first.branch(zeta);
        }
        if k == 0.0 {
            return self.second.branch(zeta);
        }
        let a = self.first.branch(zeta)?;
        let b = self.second.branch(zeta)?;
        Ok(a.iter().zip(&b).map(|(a, b)| k * a + (1.0 - k) * b).collect())
    }
}

pub fn glue_eval(
    f1: &SplineMap,
    f2: &SplineMap,
    junction: &GlueJunction,
    zeta: &[f64],
    opts: &ProjectionOptions,
) -> Result<Vec<f64>> {
    Glue::new(f1, f2, junction, opts)?.eval(zeta)
}

/// Gluing axis for an overlap inside the union of its two pieces: the
/// principal axis (among the first `d`) along which the overlap covers the
/// smallest share of the union; ties go to the later axis.
pub fn choose_glue_axis(overlap: &Points, union: &Points, d: usize) -> usize {
    let (r, _) = principal_axes(overlap);
    let extent = |p: &Points, l: usize| {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in p.rows() {
            let v: f64 = row.iter().enumerate().map(|(m, x)| r[(l, m)] * x).sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };
    let mut best = (f64::INFINITY, 0);
    for l in 0..d {
        let ratio = extent(overlap, l) / extent(union, l);
        if ratio <= best.0 * (1.0 + 1e-9) {
            best = (ratio, l);
        }
    }
    best.1
}

/// Anchors for junction `overlap` between the piece on the `near` side and
/// the next one: the overlap points extremal along principal axis `g`, the
/// first being the one closer to the centroid of `near`.
pub fn choose_anchors(overlap: &Points, near: &Points, g: usize) -> (Vec<f64>, Vec<f64>) {
    let (r, _) = principal_axes(overlap);
    let coord = |x: &[f64]| x.iter().enumerate().map(|(m, v)| r[(g, m)] * v).sum::<f64>();
    let (mut lo, mut hi) = (0, 0);
    for i in 0..overlap.len() {
        if coord(overlap.row(i)) < coord(overlap.row(lo)) {
            lo = i;
        }
        if coord(overlap.row(i)) > coord(overlap.row(hi)) {
            hi = i;
        }
    }
    let c = near.mean();
    let (a, b) = (overlap.row(lo).to_vec(), overlap.row(hi).to_vec());
    if dist2(&a, &c) <= dist2(&b, &c) {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedOptions {
    pub pieces: usize,
    /// Options for each piece fit; `d` is the manifold dimension.
    pub pme: PmeOptions,
    /// Fixed tuning parameter, or `None` to select per piece over `lambda_grid`.
    pub lambda: Option<f64>,
    pub lambda_grid: Vec<f64>,
    /// Gluing-axis override (0-based).
    pub g: Option<usize>,
    /// At most this many points enter the partitioning ISOMAP.
    pub landmarks: usize,
    pub isomap_k: Option<usize>,
    pub seed: u64,
}

impl ClosedOptions {
    pub fn new(d: usize, pieces: usize) -> Self {
        Self {
            pieces,
            pme: PmeOptions::new(d),
            lambda: None,
            lambda_grid: default_lambda_grid(),
            g: None,
            landmarks: 1000,
            isomap_k: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pme.validate()?;
        if self.pieces < 3 {
            return Err(Error::invalid("a ring needs at least 3 pieces"));
        }
        if matches!(self.g, Some(g) if g >= self.pme.d) {
            return Err(Error::invalid("gluing axis must be below the intrinsic dimension"));
        }
        if self.landmarks < 3 {
            return Err(Error::invalid("need at least 3 landmarks"));
        }
        if matches!(self.lambda, Some(l) if !(l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        if self.lambda.is_none() && self.lambda_grid.is_empty() {
            return Err(Error::invalid("empty lambda grid"));
        }
        Ok(())
    }
}

/// Summary of one piece fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceInfo {
    pub lambda: f64,
    pub msd: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub points: usize,
}

impl PieceInfo {
    fn from_fit(fit: &FitResult, points: usize) -> Self {
        Self {
            lambda: fit.lambda,
            msd: fit.msd,
            n_iter: fit.n_iter,
            converged: fit.converged,
            points,
        }
    }
}

/// A ring of pieces; piece `k` is glued to piece `k + 1` over sector `k + 1`
/// (indices modulo the ring length).
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFit {
    pub pieces: Vec<SplineMap>,
    pub junctions: Vec<GlueJunction>,
    /// Sector of each input point.
    pub partition: Vec<usize>,
    /// Coordinate bounding box of each sector's points.
    pub sector_boxes: Vec<Vec<(f64, f64)>>,
    pub info: Vec<PieceInfo>,
}

impl ClosedFit {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The box of the overlap shared by pieces `k` and `k + 1`.
    pub fn overlap_box(&self, k: usize) -> &[(f64, f64)] {
        &self.sector_boxes[(k + 1) % self.len()]
    }

    /// Glued map of junction `k` at chart coordinate `ζ`.
    pub fn glue_eval(&self, k: usize, zeta: &[f64], opts: &ProjectionOptions) -> Result<Vec<f64>> {
        let n = self.len();
        glue_eval(&self.pieces[k], &self.pieces[(k + 1) % n], &self.junctions[k], zeta, opts)
    }
}

/// Polar angle in `[0, 2π)` of each point's ring coordinate: 2-D ISOMAP on at
/// most `landmarks` points, each point taking the angle of its nearest
/// landmark.
pub fn ring_angles(x: &Points, landmarks: usize, k: Option<usize>, seed: u64) -> Result<Vec<f64>> {
    let n = x.len();
    let idx: Vec<usize> = if n <= landmarks {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = sample(&mut rng, n, landmarks).into_vec();
        v.sort_unstable();
        v
    };
    let lm = x.select(&idx);
    let coords = isomap(&lm, 2, k)?;
    let angle: Vec<f64> = coords
        .rows()
        .map(|c| c[1].atan2(c[0]).rem_euclid(2.0 * PI))
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let p = x.row(i);
            let mut best = (f64::INFINITY, 0);
            for (j, q) in lm.rows().enumerate() {
                let d2 = dist2(p, q);
                if d2 < best.0 {
                    best = (d2, j);
                }
            }
            angle[best.1]
        })
        .collect())
}

fn fit_piece(x: &Points, opts: &ClosedOptions, seed: u64) -> Result<FitResult> {
    let mut pme = opts.pme.clone();
    pme.hdmde.seed = seed;
    match opts.lambda {
        Some(l) => pme_fit(x, l, &pme),
        None => Ok(select_lambda(x, &pme, &opts.lambda_grid)?.fit),
    }
}

/// Partitions `x` into equal angular sectors of its ring coordinate, fits
/// each pair of consecutive sectors and builds the junctions.
pub fn fit_closed(x: &Points, opts: &ClosedOptions) -> Result<ClosedFit> {
    opts.validate()?;
    let n = opts.pieces;
    let d = opts.pme.d;
    let angles = ring_angles(x, opts.landmarks, opts.isomap_k, opts.seed)?;
    let width = 2.0 * PI / n as f64;
    let partition: Vec<usize> = angles
        .iter()
        .map(|a| ((a / width) as usize).min(n - 1))
        .collect();
    let mut sectors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &s) in partition.iter().enumerate() {
        sectors[s].push(i);
    }
    if let Some(k) = sectors.iter().position(|s| s.len() < x.dim() + 1) {
        return Err(Error::degenerate(format!(
            "sector {k} holds {} points; use fewer pieces",
            sectors[k].len()
        )));
    }
    let union = |ks: &[usize]| {
        let mut idx: Vec<usize> = ks.iter().flat_map(|&k| sectors[k % n].iter().copied()).collect();
        idx.sort_unstable();
        idx.dedup();
        x.select(&idx)
    };
    let fits: Vec<(FitResult, usize)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let data = union(&[k, k + 1]);
            let seed = opts.pme.hdmde.seed.wrapping_add(k as u64);
            fit_piece(&data, opts, seed)
                .map(|f| (f, data.len()))
                .map_err(|e| Error::Iteration {
                    iteration: k,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let junctions: Vec<GlueJunction> = (0..n)
        .into_par_iter()
        .map(|k| {
            let overlap = x.select(&sectors[(k + 1) % n]);
            let g = match opts.g {
                Some(g) => g,
                None => choose_glue_axis(&overlap, &union(&[k, k + 1, k + 2]), d),
            };
            let (xi1, xi2) = choose_anchors(&overlap, &x.select(&sectors[k]), g);
            build_junction(&overlap, &xi1, &xi2, d, g)
        })
        .collect::<Result<_>>()?;
    let sector_boxes = sectors.iter().map(|s| x.select(s).bounds()).collect();
    let info = fits.iter().map(|(f, m)| PieceInfo::from_fit(f, *m)).collect();
    Ok(ClosedFit {
        pieces: fits.into_iter().map(|(f, _)| f.f).collect(),
        junctions,
        partition,
        sector_boxes,
        info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_endpoints_and_midpoint() {
        assert_eq!(kappa(0.0), 1.0);
        assert_eq!(kappa(1.0), 0.0);
        assert_eq!(kappa(0.5), 0.5);
        assert_eq!(kappa(-3.0), 1.0);
        assert_eq!(kappa(7.0), 0.0);
    }

    fn plane(n: usize) -> Points {
        let mut rows = Vec::new();
        for i in 0..n {
            for j in 0..n {
                rows.push([3.0 * i as f64 / n as f64, j as f64 / n as f64, 0.0]);
            }
        }
        Points::from_rows(&rows).unwrap()
    }

    #[test]
    fn axis_aligned_plane_gives_signed_identity() {
        let z = plane(10);
        let j = build_junction(&z, &[0.0, 0.0, 0.0], &[2.7, 0.9, 0.0], 2, 1).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((j.r[(a, b)].abs() - want).abs() < 1e-12);
            }
        }
        assert!(j.rotate(&j.xi1)[1] <= j.rotate(&j.xi2)[1]);
        assert!((j.bounds[0].1 - j.bounds[0].0 - 2.7).abs() < 1e-12);
    }

    #[test]
    fn swapping_anchors_flips_the_gluing_row() {
        let z = plane(8);
        let a = [0.0, 0.0, 0.0];
        let b = [2.0, 0.8, 0.0];
        let j1 = build_junction(&z, &a, &b, 2, 1).unwrap();
        let j2 = build_junction(&z, &b, &a, 2, 1).unwrap();
        for m in 0..3 {
            assert_eq!(j1.r[(1, m)], -j2.r[(1, m)]);
            assert_eq!(j1.r[(0, m)], j2.r[(0, m)]);
        }
        assert!((j1.b_lower() + j2.b_upper()).abs() < 1e-12);
        assert!((j1.b_upper() + j2.b_lower()).abs() < 1e-12);
    }

    #[test]
    fn collinear_overlap_is_degenerate() {
        let z = Points::from_rows(&(0..10).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect::<Vec<_>>()).unwrap();
        let e = build_junction(&z, &[0.0; 3], &[1.0, 2.0, 0.0], 2, 0).unwrap_err();
        assert!(matches!(e, Error::Degenerate(_)));
    }
}
