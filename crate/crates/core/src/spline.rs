//! Thin-plate / cubic spline maps `R^d -> R^D`, `d ∈ {1, 2, 3}`.
//!
//! A map has the form
//!
//! ```text
//! f_l(t) = Σ_j s_{j,l} η_{4-d}(t - c_j) + a_{0,l} + Σ_k a_{k,l} t_k,    Tᵀ s_l = 0
//! ```
//!
//! where `η_ν(t) = ‖t‖^ν log ‖t‖` for even `ν` and `‖t‖^ν` for odd `ν`, and
//! `T` holds the affine basis `(1, t_1, …, t_d)` evaluated at the centers `c_j`.
//! Fitting minimizes, per output coordinate,
//!
//! ```text
//! ‖W^{1/2}(μ_l − E s_l − T a_l)‖² + λ · ρ_d · s_lᵀ E s_l    subject to Tᵀ s_l = 0
//! ```
//!
//! through the symmetric saddle-point system of order `N + 2d + 2`. `ρ_d` is
//! `+1` for `d ∈ {1, 2}` and `−1` for `d = 3`, where `‖t‖` is conditionally
//! negative definite and the bending energy carries the opposite sign.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymmetricIndefinite;
use crate::points::Points;
use crate::projection::Embedding;

/// Kernel order `ν = 4 − d`.
pub fn kernel_order(d: usize) -> u32 {
    (4 - d) as u32
}

/// Sign that turns `sᵀ E s` into the (non-negative) bending energy.
pub fn penalty_sign(d: usize) -> f64 {
    if d == 3 {
        -1.0
    } else {
        1.0
    }
}

/// `η_ν` as a function of the radius `r = ‖t‖`.
#[inline]
pub fn eta_radial(nu: u32, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    match nu {
        1 => r,
        2 => r * r * r.ln(),
        3 => r * r * r,
        _ => r.powi(nu as i32) * if nu % 2 == 0 { r.ln() } else { 1.0 },
    }
}

/// `η_ν(t)`.
pub fn eta(nu: u32, t: &[f64]) -> f64 {
    eta_radial(nu, t.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `∇η_ν(t) = g(r) · t`; returns `g(r)`, using the zero limit at the origin.
#[inline]
fn eta_gradient_factor(nu: u32, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    match nu {
        1 => 1.0 / r,
        2 => 2.0 * r.ln() + 1.0,
        3 => 3.0 * r,
        _ => unreachable!("kernel order {nu} is not supported"),
    }
}

/// A fitted (or hand-built) spline map.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineMap {
    d: usize,
    dim: usize,
    centers: Points,
    /// `N × D`, row-major.
    s: Vec<f64>,
    /// `(d+1) × D`, row-major; row 0 is the constant term.
    a: Vec<f64>,
}

impl SplineMap {
    /// Builds a map from centers (`N × d`), kernel coefficients (`N × D`) and
    /// affine coefficients (`(d+1) × D`).
    pub fn new(centers: Points, s: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Self> {
        let d = centers.dim();
        if !(1..=3).contains(&d) {
            return Err(Error::Unsupported(format!(
                "intrinsic dimension {d} (only 1, 2, 3)"
            )));
        }
        let dim = a.ncols();
        if a.nrows() != d + 1 {
            return Err(Error::invalid(format!(
                "affine block has {} rows, expected {}",
                a.nrows(),
                d + 1
            )));
        }
        if s.nrows() != centers.len() || (s.nrows() > 0 && s.ncols() != dim) {
            return Err(Error::invalid("kernel coefficient block shape mismatch"));
        }
        let to_rows = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect()
        };
        let map = Self {
            d,
            dim,
            s: to_rows(s),
            a: to_rows(a),
            centers,
        };
        if map.s.iter().chain(&map.a).any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite spline coefficient"));
        }
        Ok(map)
    }

    /// The affine map `t ↦ a_0 + Σ a_k t_k` without kernel terms.
    pub fn affine(a: &DMatrix<f64>) -> Result<Self> {
        let d = a.nrows().checked_sub(1).filter(|&d| d >= 1).ok_or_else(|| {
            Error::invalid("affine block needs at least two rows")
        })?;
        Self::new(Points::empty(d), &DMatrix::zeros(0, a.ncols()), a)
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.d
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> u32 {
        kernel_order(self.d)
    }

    pub fn centers(&self) -> &Points {
        &self.centers
    }

    pub fn kernel_coefficients(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.centers.len(), self.dim, &self.s)
    }

    pub fn affine_coefficients(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d + 1, self.dim, &self.a)
    }

    /// Map with every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SplineMap {
        let mut m = self.clone();
        m.s.iter_mut().chain(m.a.iter_mut()).for_each(|v| *v *= c);
        m
    }

    pub fn eval(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: &[f64], out: &mut [f64]) {
        debug_assert_eq!(t.len(), self.d);
        let (d, dim, nu) = (self.d, self.dim, self.nu());
        out.copy_from_slice(&self.a[..dim]);
        for k in 0..d {
            let row = &self.a[(k + 1) * dim..(k + 2) * dim];
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * t[k];
            }
        }
        for (j, c) in self.centers.rows().enumerate() {
            let r = c
                .iter()
                .zip(t)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt();
            let e = eta_radial(nu, r);
            if e != 0.0 {
                let row = &self.s[j * dim..(j + 1) * dim];
                for (o, c) in out.iter_mut().zip(row) {
                    *o += c * e;
                }
            }
        }
    }

    /// `D × d` Jacobian.
    pub fn jacobian(&self, t: &[f64]) -> DMatrix<f64> {
        let mut value = vec![0.0; self.dim];
        let mut jac = vec![0.0; self.dim * self.d];
        self.value_and_jacobian(t, &mut value, &mut jac);
        DMatrix::from_row_slice(self.dim, self.d, &jac)
    }

    /// Value and row-major `D × d` Jacobian in one pass over the centers.
    pub fn value_and_jacobian(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) {
        let (d, dim, nu) = (self.d, self.dim, self.nu());
        value.copy_from_slice(&self.a[..dim]);
        for l in 0..dim {
            for k in 0..d {
                let c = self.a[(k + 1) * dim + l];
                value[l] += c * t[k];
                jac[l * d + k] = c;
            }
        }
        let mut diff = [0.0; 3];
        for (j, c) in self.centers.rows().enumerate() {
            let mut r2 = 0.0;
            for k in 0..d {
                diff[k] = t[k] - c[k];
                r2 += diff[k] * diff[k];
            }
            if r2 == 0.0 {
                continue;
            }
            let r = r2.sqrt();
            let e = eta_radial(nu, r);
            let g = eta_gradient_factor(nu, r);
            let row = &self.s[j * dim..(j + 1) * dim];
            for l in 0..dim {
                value[l] += row[l] * e;
                for k in 0..d {
                    jac[l * d + k] += row[l] * g * diff[k];
                }
            }
        }
    }

    /// `Σ_l ρ_d s_lᵀ E s_l`, the bending energy of the map, clamped at zero
    /// for round-off negatives.
    pub fn hessian_penalty(&self) -> f64 {
        let n = self.centers.len();
        let (dim, nu) = (self.dim, self.nu());
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let e = eta_radial(
                    nu,
                    crate::points::dist2(self.centers.row(i), self.centers.row(j)).sqrt(),
                );
                if e == 0.0 {
                    continue;
                }
                for l in 0..dim {
                    total += self.s[i * dim + l] * e * self.s[j * dim + l];
                }
            }
        }
        let total = total * penalty_sign(self.d);
        if total < 0.0 && total > -1e-10 * (1.0 + self.s.iter().map(|v| v * v).sum::<f64>()) {
            0.0
        } else {
            total
        }
    }

    /// Largest `|Tᵀ s_l|` entry relative to the magnitude of its summands.
    pub fn constraint_residual(&self) -> f64 {
        let (d, dim) = (self.d, self.dim);
        let mut worst = 0.0_f64;
        for l in 0..dim {
            for k in 0..=d {
                let (mut sum, mut mag) = (0.0, 0.0);
                for (j, c) in self.centers.rows().enumerate() {
                    let p = if k == 0 { 1.0 } else { c[k - 1] };
                    let term = self.s[j * dim + l] * p;
                    sum += term;
                    mag += term.abs();
                }
                if mag > 0.0 {
                    worst = worst.max(sum.abs() / mag);
                }
            }
        }
        worst
    }

    /// Axis-aligned bounding box of the centers.
    pub fn knot_bounds(&self) -> Option<Vec<(f64, f64)>> {
        (!self.centers.is_empty()).then(|| self.centers.bounds())
    }
}

impl Embedding for SplineMap {
    fn intrinsic_dim(&self) -> usize {
        self.d
    }

    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: &[f64], out: &mut [f64]) {
        SplineMap::eval_into(self, t, out)
    }

    fn value_and_jacobian(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) {
        SplineMap::value_and_jacobian(self, t, value, jac)
    }

    fn default_box(&self) -> Option<Vec<(f64, f64)>> {
        self.knot_bounds().map(|b| {
            b.into_iter()
                .map(|(lo, hi)| {
                    let pad = 0.25 * (hi - lo).max(1e-12);
                    (lo - pad, hi + pad)
                })
                .collect()
        })
    }
}

/// The assembled least-squares problem for one set of knots.
#[derive(Debug, Clone)]
pub struct SplineSystem {
    d: usize,
    knots: Points,
    targets: Points,
    weights: Vec<f64>,
    /// `N × N` kernel Gram matrix.
    pub e: DMatrix<f64>,
    /// `N × (d+1)` affine basis values.
    pub t: DMatrix<f64>,
    merged: usize,
}

/// Solution of the saddle-point system including the Lagrange multipliers.
#[derive(Debug, Clone)]
pub struct SplineSolution {
    pub map: SplineMap,
    /// `(d+1) × D`.
    pub multipliers: DMatrix<f64>,
}

/// Assembles `E`, `T` and `W` for knots `N × d`, targets `N × D` and weights.
/// Knots closer than `1e-9 · diameter` are merged (weights summed, targets
/// weight-averaged).
pub fn assemble(knots: &Points, targets: &Points, weights: &[f64]) -> Result<SplineSystem> {
    let d = knots.dim();
    if !(1..=3).contains(&d) {
        return Err(Error::Unsupported(format!(
            "intrinsic dimension {d} (only 1, 2, 3)"
        )));
    }
    if knots.len() != targets.len() || knots.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} knots, {} targets and {} weights",
            knots.len(),
            targets.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    let (knots, targets, weights, merged) = merge_duplicates(knots, targets, weights);
    let n = knots.len();
    if n < d + 1 {
        return Err(Error::degenerate(format!(
            "{n} distinct knots cannot determine an affine map in {d} dimensions"
        )));
    }
    let t = DMatrix::from_fn(n, d + 1, |i, k| if k == 0 { 1.0 } else { knots.row(i)[k - 1] });
    let sv = t.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 1e-10 * smax {
        return Err(Error::degenerate(format!(
            "knots lie in a lower-dimensional affine subspace (rank of T below {})",
            d + 1
        )));
    }
    let nu = kernel_order(d);
    let mut e = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = eta_radial(nu, crate::points::dist2(knots.row(i), knots.row(j)).sqrt());
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
    }
    Ok(SplineSystem {
        d,
        knots,
        targets,
        weights,
        e,
        t,
        merged,
    })
}

fn merge_duplicates(
    knots: &Points,
    targets: &Points,
    weights: &[f64],
) -> (Points, Points, Vec<f64>, usize) {
    let tol2 = (1e-9 * knots.diameter()).powi(2);
    let n = knots.len();
    let mut group: Vec<usize> = (0..n).collect();
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        match reps
            .iter()
            .find(|&&r| crate::points::dist2(knots.row(i), knots.row(r)) <= tol2)
        {
            Some(&r) => group[i] = r,
            None => reps.push(i),
        }
    }
    if reps.len() == n {
        return (knots.clone(), targets.clone(), weights.to_vec(), 0);
    }
    let dim = targets.dim();
    let mut out_k = Points::empty(knots.dim());
    let mut out_t = Points::empty(dim);
    let mut out_w = Vec::with_capacity(reps.len());
    for &r in &reps {
        let members: Vec<usize> = (0..n).filter(|&i| group[i] == r).collect();
        let wsum: f64 = members.iter().map(|&i| weights[i]).sum();
        let mut avg = vec![0.0; dim];
        for &i in &members {
            let w = if wsum > 0.0 {
                weights[i] / wsum
            } else {
                1.0 / members.len() as f64
            };
            for (a, v) in avg.iter_mut().zip(targets.row(i)) {
                *a += w * v;
            }
        }
        out_k.push(knots.row(r));
        out_t.push(&avg);
        out_w.push(wsum);
    }
    (out_k, out_t, out_w, n - reps.len())
}

impl SplineSystem {
    pub fn intrinsic_dim(&self) -> usize {
        self.d
    }

    /// Knots after merging.
    pub fn knots(&self) -> &Points {
        &self.knots
    }

    pub fn targets(&self) -> &Points {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of knots removed by the duplicate merge.
    pub fn merged(&self) -> usize {
        self.merged
    }

    fn target_column(&self, l: usize) -> DVector<f64> {
        DVector::from_iterator(self.knots.len(), self.targets.rows().map(|r| r[l]))
    }

    /// The full symmetric block matrix for a given `λ`.
    pub fn block_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.knots.len();
        let p = self.d + 1;
        let rho = penalty_sign(self.d);
        let mut ew = self.e.clone();
        for (j, w) in self.weights.iter().enumerate() {
            ew.column_mut(j).scale_mut(*w);
        }
        let ewe = &ew * &self.e;
        let ewt = &ew * &self.t;
        let mut twt = self.t.transpose();
        for (j, w) in self.weights.iter().enumerate() {
            twt.column_mut(j).scale_mut(*w);
        }
        let twt = twt * &self.t;
        let size = n + 2 * p;
        let mut m = DMatrix::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = 2.0 * ewe[(i, j)] + 2.0 * rho * lambda * self.e[(i, j)];
            }
            for k in 0..p {
                m[(i, n + k)] = 2.0 * ewt[(i, k)];
                m[(n + k, i)] = 2.0 * ewt[(i, k)];
                m[(i, n + p + k)] = self.t[(i, k)];
                m[(n + p + k, i)] = self.t[(i, k)];
            }
        }
        for a in 0..p {
            for b in 0..p {
                m[(n + a, n + b)] = 2.0 * twt[(a, b)];
            }
        }
        // exact symmetry despite round-off in the products
        for i in 0..size {
            for j in 0..i {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn rhs(&self, l: usize) -> DVector<f64> {
        let n = self.knots.len();
        let p = self.d + 1;
        let wmu = DVector::from_iterator(
            n,
            self.target_column(l)
                .iter()
                .zip(&self.weights)
                .map(|(m, w)| m * w),
        );
        let top = &self.e * &wmu * 2.0;
        let mid = self.t.transpose() * &wmu * 2.0;
        let mut r = DVector::zeros(n + 2 * p);
        r.rows_mut(0, n).copy_from(&top);
        r.rows_mut(n, p).copy_from(&mid);
        r
    }

    pub fn solve(&self, lambda: f64) -> Result<SplineMap> {
        self.solve_full(lambda).map(|s| s.map)
    }

    /// Solves the block system for every output coordinate with one
    /// factorization.
    ///
    /// The full block matrix squares the conditioning of `E`. When every weight
    /// is positive the same stationary point solves the bordered system
    /// `[[E + ρλW⁻¹, T], [Tᵀ, 0]] [s; α] = [μ; 0]` (with zero multipliers),
    /// which is factored instead; the answer is then checked against the full
    /// block system. Zero weights fall back to factoring the full matrix.
    pub fn solve_full(&self, lambda: f64) -> Result<SplineSolution> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let n = self.knots.len();
        let p = self.d + 1;
        let dim = self.targets.dim();
        let m = self.block_matrix(lambda);
        let m_norm = m.norm();
        let mut s = DMatrix::zeros(n, dim);
        let mut a = DMatrix::zeros(p, dim);
        let mut mult = DMatrix::zeros(p, dim);
        let bordered = self.weights.iter().all(|&w| w > 0.0);
        let fact = if bordered {
            let rho = penalty_sign(self.d);
            let mut b = DMatrix::zeros(n + p, n + p);
            b.view_mut((0, 0), (n, n)).copy_from(&self.e);
            for (i, w) in self.weights.iter().enumerate() {
                b[(i, i)] += rho * lambda / w;
            }
            b.view_mut((0, n), (n, p)).copy_from(&self.t);
            b.view_mut((n, 0), (p, n)).copy_from(&self.t.transpose());
            SymmetricIndefinite::factor(&b)?
        } else {
            SymmetricIndefinite::factor(&m)?
        };
        for l in 0..dim {
            let rhs = self.rhs(l);
            let x = if bordered {
                let mut r = DVector::zeros(n + p);
                r.rows_mut(0, n).copy_from(&self.target_column(l));
                let y = fact.solve(&r);
                let mut x = DVector::zeros(n + 2 * p);
                x.rows_mut(0, n + p).copy_from(&y);
                x
            } else {
                fact.solve(&rhs)
            };
            let res = (&m * &x - &rhs).norm();
            let scale = m_norm * x.norm() + rhs.norm();
            if !(res <= 1e-8 * scale) {
                return Err(Error::numerical(format!(
                    "block solve residual {res:.3e} too large (scale {scale:.3e}); \
                     try a small lambda jitter or merging knots"
                )));
            }
            s.column_mut(l).copy_from(&x.rows(0, n));
            a.column_mut(l).copy_from(&x.rows(n, p));
            mult.column_mut(l).copy_from(&x.rows(n + p, p));
        }
        Ok(SplineSolution {
            map: SplineMap::new(self.knots.clone(), &s, &a)?,
            multipliers: mult,
        })
    }

    /// Weighted residual plus penalty, summed over output coordinates.
    pub fn objective(&self, lambda: f64, map: &SplineMap) -> f64 {
        let s = map.kernel_coefficients();
        let a = map.affine_coefficients();
        let rho = penalty_sign(self.d);
        let mut total = 0.0;
        for l in 0..self.targets.dim() {
            let sl = s.column(l);
            let fit = &self.e * sl + &self.t * a.column(l);
            let mu = self.target_column(l);
            let wr: f64 = (0..mu.len())
                .map(|i| self.weights[i] * (mu[i] - fit[i]).powi(2))
                .sum();
            total += wr + lambda * rho * sl.dot(&(&self.e * sl));
        }
        total
    }

    /// Relative norm of the Lagrangian gradient at a solution, assembled
    /// term by term from `E`, `T` and `W` rather than from the block matrix.
    pub fn kkt_residual(&self, lambda: f64, sol: &SplineSolution) -> f64 {
        let s = sol.map.kernel_coefficients();
        let a = sol.map.affine_coefficients();
        let rho = penalty_sign(self.d);
        let w = DVector::from_column_slice(&self.weights);
        let mut worst = 0.0_f64;
        for l in 0..self.targets.dim() {
            let sl = s.column(l).into_owned();
            let al = a.column(l).into_owned();
            let ml = sol.multipliers.column(l).into_owned();
            let mu = self.target_column(l);
            let es = &self.e * &sl;
            let ta = &self.t * &al;
            let wr = (&mu - &es - &ta).component_mul(&w);
            let t1 = &self.e * &wr * -2.0;
            let t2 = &es * (2.0 * rho * lambda);
            let t3 = &self.t * &ml;
            let grad_s = &t1 + &t2 + &t3;
            let grad_a = self.t.transpose() * &wr * -2.0;
            let ewmu = &self.e * mu.component_mul(&w) * 2.0;
            let scale = ewmu.norm()
                + (&self.e * es.component_mul(&w)).norm() * 2.0
                + (&self.e * ta.component_mul(&w)).norm() * 2.0
                + t2.norm()
                + t3.norm()
                + (self.t.transpose() * mu.component_mul(&w)).norm() * 2.0
                + f64::MIN_POSITIVE;
            worst = worst.max((grad_s.norm_squared() + grad_a.norm_squared()).sqrt() / scale);
        }
        worst
    }
}
