//! Data reduction to a weighted average joint: k-means nodes, a common
//! Gaussian bandwidth, constrained-EM weights, and the sequential Z-test that
//! picks the number of nodes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::points::{dist2, Points};

/// A discrete measure `Σ θ_j δ_{μ_j}` with the bandwidth of its Gaussian
/// mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Waj {
    pub nodes: Points,
    pub theta: Vec<f64>,
    pub sigma: f64,
}

impl Waj {
    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// `Σ θ_j μ_j`.
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes.dim()];
        for (row, t) in self.nodes.rows().zip(&self.theta) {
            for (a, v) in m.iter_mut().zip(row) {
                *a += t * v;
            }
        }
        m
    }

    /// The mixture density `Σ θ_j ψ_σ(x − μ_j)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.nodes.dim() as f64;
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.5 * d);
        let inv = 0.5 / (self.sigma * self.sigma);
        self.nodes
            .rows()
            .zip(&self.theta)
            .map(|(mu, t)| t * (-dist2(x, mu) * inv).exp())
            .sum::<f64>()
            * norm
    }
}

/// Weight held by the nodes inside a ball, relative to the others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierWeight {
    /// Nodes inside the ball.
    pub inside: usize,
    /// Total weight of those nodes over the mean weight of the rest.
    pub ratio: f64,
}

/// `θ_out / θ̄_−out` for the ball of `radius` about `center`; `None` when the
/// ball holds no node or every node.
pub fn outlier_weight(w: &Waj, center: &[f64], radius: f64) -> Option<OutlierWeight> {
    let (mut out, mut rest, mut inside) = (0.0, 0.0, 0usize);
    for (mu, t) in w.nodes.rows().zip(&w.theta) {
        if dist2(mu, center) < radius * radius {
            out += t;
            inside += 1;
        } else {
            rest += t;
        }
    }
    if inside == 0 || inside == w.n() {
        return None;
    }
    Some(OutlierWeight {
        inside,
        ratio: out / (rest / (w.n() - inside) as f64),
    })
}

/// One step of the sequential test comparing the fits at `N` and `N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZReport {
    pub n: usize,
    pub z: f64,
    pub delta_bar: f64,
    pub s_hat: f64,
    pub deltas: Vec<f64>,
}

/// k-means++ seeding followed by Lloyd iterations. Every returned cluster is
/// nonempty and every center is the mean of its cluster.
pub fn kmeans_partition(x: &Points, n: usize, seed: u64) -> Result<(Points, Vec<usize>)> {
    let total = x.len();
    if n == 0 || n > total {
        return Err(Error::invalid(format!(
            "cannot form {n} clusters from {total} points"
        )));
    }
    let dim = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Points::empty(dim);
    centers.push(x.row(rng.random_range(0..total)));
    let mut nearest: Vec<f64> = x.rows().map(|r| dist2(r, centers.row(0))).collect();
    while centers.len() < n {
        let sum: f64 = nearest.iter().sum();
        let pick = if sum > 0.0 {
            let mut target = rng.random::<f64>() * sum;
            let mut pick = total - 1;
            for (i, w) in nearest.iter().enumerate() {
                if target < *w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..total)
        };
        centers.push(x.row(pick));
        let c = centers.row(centers.len() - 1).to_vec();
        for (d, r) in nearest.iter_mut().zip(x.rows()) {
            *d = d.min(dist2(r, &c));
        }
    }
    let mut assign = vec![usize::MAX; total];
    for _ in 0..300 {
        let new: Vec<usize> = x
            .as_slice()
            .par_chunks(dim)
            .map(|r| nearest_center(r, &centers).0)
            .collect();
        let changed = new != assign;
        assign = new;
        fill_empty_clusters(x, &centers, &mut assign, n);
        centers = cluster_means(x, &assign, n);
        if !changed {
            break;
        }
    }
    Ok((centers, assign))
}

fn nearest_center(r: &[f64], centers: &Points) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.rows().enumerate() {
        let d = dist2(r, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Moves the points farthest from their centers into empty clusters.
fn fill_empty_clusters(x: &Points, centers: &Points, assign: &mut [usize], n: usize) {
    let mut counts = vec![0usize; n];
    for &a in assign.iter() {
        counts[a] += 1;
    }
    for j in 0..n {
        if counts[j] > 0 {
            continue;
        }
        let donor = (0..x.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&a, &b| {
                dist2(x.row(a), centers.row(assign[a]))
                    .total_cmp(&dist2(x.row(b), centers.row(assign[b])))
                    .then(b.cmp(&a))
            })
            .expect("n <= number of points");
        counts[assign[donor]] -= 1;
        assign[donor] = j;
        counts[j] = 1;
    }
}

fn cluster_means(x: &Points, assign: &[usize], n: usize) -> Points {
    let dim = x.dim();
    let mut sums = vec![0.0; n * dim];
    let mut counts = vec![0usize; n];
    for (r, &a) in x.rows().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (j, c) in counts.iter().enumerate() {
        for s in &mut sums[j * dim..(j + 1) * dim] {
            *s /= *c as f64;
        }
    }
    Points::new(dim, sums).expect("finite means")
}

/// `σ̂_N = ((1/D)(1/N) Σ_j (1/L_j) Σ_l ‖x_{j,l} − μ_j‖²)^{1/2}`.
pub fn estimate_sigma(x: &Points, centers: &Points, assign: &[usize]) -> f64 {
    let n = centers.len();
    let mut ss = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (r, &a) in x.rows().zip(assign) {
        ss[a] += dist2(r, centers.row(a));
        counts[a] += 1;
    }
    let total: f64 = ss
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .sum();
    (total / (x.dim() as f64 * n as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    /// Stop once `sup_j |θ^{(k+1)}_j − θ^{(k)}_j| < eps`.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub theta: Vec<f64>,
    pub iterations: usize,
    /// `sup_j |θ^{(k+1)} − θ^{(k)}|` per iteration.
    pub sup_changes: Vec<f64>,
}

/// Kernel values `exp(−‖x_i − μ_j‖²/2σ² − shift_i)` with the row maximum
/// shifted to zero, so every row has an entry equal to one.
struct Kernel {
    n: usize,
    /// Row-major `I × N`.
    k: Vec<f64>,
    /// Row-major `I × N` log-kernel, kept for rows whose shifted sum underflows.
    log_k: Vec<f64>,
}

impl Kernel {
    fn new(x: &Points, nodes: &Points, sigma: f64) -> Self {
        let n = nodes.len();
        let inv = 0.5 / (sigma * sigma);
        let log_k: Vec<f64> = x
            .as_slice()
            .par_chunks(x.dim())
            .flat_map_iter(|r| {
                let row: Vec<f64> = nodes.rows().map(|mu| -dist2(r, mu) * inv).collect();
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.into_iter().map(move |v| v - m)
            })
            .collect();
        let k = log_k.iter().map(|v| v.exp()).collect();
        Self { n, k, log_k }
    }

    /// Column sums of the responsibilities `w_ij(θ)`.
    fn responsibility_sums(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.n;
        let log_theta: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
        self.k
            .par_chunks(n)
            .zip(self.log_k.par_chunks(n))
            .fold(
                || vec![0.0; n],
                |mut acc, (row, lrow)| {
                    let s: f64 = row.iter().zip(theta).map(|(k, t)| k * t).sum();
                    if s > 1e-250 && s.is_finite() {
                        for j in 0..n {
                            acc[j] += theta[j] * row[j] / s;
                        }
                    } else {
                        let terms: Vec<f64> =
                            lrow.iter().zip(&log_theta).map(|(a, b)| a + b).collect();
                        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        if m.is_finite() {
                            let z: f64 = terms.iter().map(|v| (v - m).exp()).sum();
                            for j in 0..n {
                                acc[j] += (terms[j] - m).exp() / z;
                            }
                        }
                    }
                    acc
                },
            )
            .reduce(
                || vec![0.0; n],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }
}

/// Solves for `(λ₁, λ₂)` such that `θ_j = c_j / (λ₁ + λ₂ᵀ(μ_j − x̄))` lies on
/// the simplex with `Σ θ_j μ_j = x̄`, by damped Gauss–Newton from `(Σc, 0)`.
/// Nodes are passed centered at `x̄`.
pub(crate) fn solve_multipliers(c: &[f64], centered: &Points) -> std::result::Result<Vec<f64>, String> {
    let dim = centered.dim();
    let total: f64 = c.iter().sum();
    let p = dim + 1;
    let mut lam = vec![0.0; p];
    lam[0] = total;
    let scale = centered
        .rows()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let residual = |lam: &[f64]| -> Option<(Vec<f64>, DMatrix<f64>)> {
        let mut r = vec![0.0; p];
        r[0] = -1.0;
        let mut jac = DMatrix::zeros(p, p);
        for (j, mu) in centered.rows().enumerate() {
            if c[j] == 0.0 {
                continue;
            }
            let den = lam[0] + mu.iter().zip(&lam[1..]).map(|(a, b)| a * b).sum::<f64>();
            if !(den > 0.0) {
                return None;
            }
            let th = c[j] / den;
            let g = th / den;
            let basis = |k: usize| if k == 0 { 1.0 } else { mu[k - 1] / scale };
            for a in 0..p {
                r[a] += th * basis(a);
                for b in 0..p {
                    let db = if b == 0 { 1.0 } else { mu[b - 1] };
                    jac[(a, b)] -= g * basis(a) * db;
                }
            }
        }
        Some((r, jac))
    };
    let norm2 = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let (mut r, mut jac) = residual(&lam).ok_or("non-positive denominator at the start")?;
    let mut mu_damp = 1e-8;
    for _ in 0..200 {
        let f = norm2(&r);
        if f <= 1e-28 {
            return Ok(lam);
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let diag_max = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        for _ in 0..60 {
            let mut m = jtj.clone();
            for k in 0..p {
                m[(k, k)] += mu_damp * diag_max;
            }
            let Some(step) = m.lu().solve(&g) else {
                mu_damp *= 10.0;
                continue;
            };
            let cand: Vec<f64> = lam.iter().zip(step.iter()).map(|(l, s)| l - s).collect();
            if let Some((cr, cj)) = residual(&cand) {
                if norm2(&cr) < f {
                    lam = cand;
                    r = cr;
                    jac = cj;
                    mu_damp = (mu_damp * 0.1).max(1e-15);
                    accepted = true;
                    break;
                }
            }
            mu_damp *= 10.0;
        }
        if !accepted {
            return if norm2(&r) <= 1e-20 {
                Ok(lam)
            } else {
                Err(format!(
                    "multiplier solve stalled with residual {:.3e}",
                    norm2(&r).sqrt()
                ))
            };
        }
    }
    if norm2(&r) <= 1e-20 {
        Ok(lam)
    } else {
        Err("multiplier solve did not converge".into())
    }
}

fn centered_nodes(nodes: &Points, xbar: &[f64]) -> Points {
    let mut c = nodes.clone();
    for i in 0..c.len() {
        for (v, m) in c.row_mut(i).iter_mut().zip(xbar) {
            *v -= m;
        }
    }
    c
}

/// One constrained EM update from `theta`.
pub fn em_step(x: &Points, nodes: &Points, sigma: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let kernel = Kernel::new(x, nodes, sigma);
    let centered = centered_nodes(nodes, &x.mean());
    constrained_update(&kernel, &centered, theta, 0)
}

fn constrained_update(
    kernel: &Kernel,
    centered: &Points,
    theta: &[f64],
    iteration: usize,
) -> Result<Vec<f64>> {
    let c = kernel.responsibility_sums(theta);
    let lam = solve_multipliers(&c, centered).map_err(|msg| Error::EmFailure {
        iteration,
        msg,
        theta: theta.to_vec(),
    })?;
    let mut next = Vec::with_capacity(c.len());
    for (j, mu) in centered.rows().enumerate() {
        let den = lam[0] + mu.iter().zip(&lam[1..]).map(|(a, b)| a * b).sum::<f64>();
        if c[j] > 0.0 && !(den > 0.0) {
            return Err(Error::EmFailure {
                iteration,
                msg: format!("non-positive denominator {den:.3e} for node {j}"),
                theta: theta.to_vec(),
            });
        }
        next.push(if c[j] > 0.0 { c[j] / den } else { 0.0 });
    }
    Ok(next)
}

/// Iterates the constrained EM update from the uniform weights.
pub fn em_theta(x: &Points, nodes: &Points, sigma: f64, opts: &EmOptions) -> Result<EmResult> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    if nodes.dim() != x.dim() || nodes.is_empty() {
        return Err(Error::invalid("nodes must be nonempty and match the data dimension"));
    }
    let n = nodes.len();
    let kernel = Kernel::new(x, nodes, sigma);
    let centered = centered_nodes(nodes, &x.mean());
    let mut theta = vec![1.0 / n as f64; n];
    let mut sup_changes = Vec::new();
    for k in 0..opts.max_iter {
        let next = constrained_update(&kernel, &centered, &theta, k)?;
        let change = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        sup_changes.push(change);
        theta = next;
        if change < opts.eps {
            let s: f64 = theta.iter().sum();
            theta.iter_mut().for_each(|t| *t /= s);
            return Ok(EmResult {
                theta,
                iterations: k + 1,
                sup_changes,
            });
        }
    }
    Err(Error::Convergence(format!(
        "EM weights still moving after {} iterations (last change {:.3e})",
        opts.max_iter,
        sup_changes.last().copied().unwrap_or(f64::NAN)
    )))
}

/// `Z_{I,N} = √I Δ̄ / Ŝ` with `Δ̂_i = p_{N+1}(x_i) − p_N(x_i)`.
pub fn z_statistic(x: &Points, model_n: &Waj, model_n1: &Waj) -> Result<ZReport> {
    let pairs: Vec<(f64, f64)> = x
        .as_slice()
        .par_chunks(x.dim())
        .map(|r| (model_n.density(r), model_n1.density(r)))
        .collect();
    let deltas: Vec<f64> = pairs.iter().map(|(p, q)| q - p).collect();
    let i = deltas.len() as f64;
    let delta_bar = deltas.iter().sum::<f64>() / i;
    let s2 = deltas.iter().map(|d| d * d).sum::<f64>() / i - delta_bar * delta_bar;
    let s_hat = s2.max(0.0).sqrt();
    // differences at round-off level of the densities count as equal
    let level = pairs.iter().map(|(p, _)| p.abs()).sum::<f64>() / i;
    if !(s_hat > 1e-12 * level) {
        return Err(Error::degenerate(format!(
            "Z statistic at N = {} has zero variance",
            model_n.n()
        )));
    }
    Ok(ZReport {
        n: model_n.n(),
        z: i.sqrt() * delta_bar / s_hat,
        delta_bar,
        s_hat,
        deltas,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HdmdeOptions {
    /// Starting number of nodes; `None` means `20 · D`.
    pub n0: Option<usize>,
    pub alpha: f64,
    pub em: EmOptions,
    /// Largest `N` tried; `None` means `I / 2`.
    pub n_max: Option<usize>,
    pub seed: u64,
}

impl Default for HdmdeOptions {
    fn default() -> Self {
        Self {
            n0: None,
            alpha: 0.05,
            em: EmOptions::default(),
            n_max: None,
            seed: 0,
        }
    }
}

impl HdmdeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n0 == Some(0) {
            return Err(Error::invalid("N0 must be at least 1"));
        }
        if !(self.em.eps > 0.0) || self.em.max_iter == 0 {
            return Err(Error::invalid("EM tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// The standard normal quantile `z_{1−α/2}`.
pub fn z_threshold(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0)
}

/// Fits the `N`-node mixture: fresh k-means, `σ̂_N`, constrained EM.
pub fn fit_mixture(x: &Points, n: usize, seed: u64, em: &EmOptions) -> Result<Waj> {
    let (nodes, assign) = kmeans_partition(x, n, seed)?;
    let sigma = estimate_sigma(x, &nodes, &assign);
    if !(sigma > 0.0) {
        return Err(Error::degenerate(format!(
            "every point coincides with its center at N = {n}"
        )));
    }
    let theta = em_theta(x, &nodes, sigma, em)?.theta;
    Ok(Waj { nodes, theta, sigma })
}

fn seed_for(seed: u64, n: usize) -> u64 {
    seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Raises `N` from `N0` until `|Z_{I,N}| < z_{1−α/2}` and returns the WAJ at
/// that `N` with the test trace.
pub fn hdmde(x: &Points, opts: &HdmdeOptions) -> Result<(Waj, Vec<ZReport>)> {
    opts.validate()?;
    let total = x.len();
    let n0 = opts.n0.unwrap_or(20 * x.dim());
    let cap = opts.n_max.unwrap_or(total / 2).min(total);
    if n0 + 1 > cap {
        return Err(Error::invalid(format!(
            "N0 = {n0} leaves no room below the cap {cap} (I = {total})"
        )));
    }
    let threshold = z_threshold(opts.alpha);
    let mut trace = Vec::new();
    let fail = |msg: String, trace: Vec<ZReport>| Error::Selection { msg, trace };
    let mut current = fit_mixture(x, n0, seed_for(opts.seed, n0), &opts.em)?;
    let mut n = n0;
    while n < cap {
        let next = fit_mixture(x, n + 1, seed_for(opts.seed, n + 1), &opts.em)?;
        let report = match z_statistic(x, &current, &next) {
            Ok(r) => r,
            Err(e) => return Err(fail(format!("at N = {n}: {e}"), trace)),
        };
        let stop = report.z.abs() < threshold;
        trace.push(report);
        if stop {
            return Ok((current, trace));
        }
        current = next;
        n += 1;
    }
    Err(fail(
        format!("|Z| stayed above {threshold:.4} up to the cap N = {cap}"),
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmeans_trivial_cases() {
        let x = Points::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]).unwrap();
        let (c, a) = kmeans_partition(&x, 3, 1).unwrap();
        let mut rows: Vec<Vec<f64>> = c.rows().map(|r| r.to_vec()).collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(rows, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]]);
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        let (c, _) = kmeans_partition(&x, 1, 1).unwrap();
        assert_eq!(c.row(0), &x.mean()[..]);
        assert!(kmeans_partition(&x, 4, 1).is_err());
    }

    #[test]
    fn sigma_hand_value() {
        let x = Points::from_rows(&[[0.0], [2.0]]).unwrap();
        let c = Points::from_rows(&[[1.0]]).unwrap();
        assert_eq!(estimate_sigma(&x, &c, &[0, 0]), 1.0);
        assert_eq!(estimate_sigma(&x, &x, &[0, 1]), 0.0);
    }

    #[test]
    fn threshold_is_the_normal_quantile() {
        assert!((z_threshold(0.05) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn single_node_gets_all_the_weight() {
        let x = Points::from_rows(&[[0.0, 1.0], [2.0, 3.0], [1.0, 1.0]]).unwrap();
        let nodes = Points::from_rows(&[x.mean()]).unwrap();
        let r = em_theta(&x, &nodes, 0.5, &EmOptions::default()).unwrap();
        assert_eq!(r.theta, vec![1.0]);
    }

    #[test]
    fn multipliers_at_inactive_constraint() {
        // symmetric nodes and symmetric responsibilities: (I, 0) is exact
        let centered = Points::from_rows(&[[-1.0], [1.0]]).unwrap();
        let lam = solve_multipliers(&[5.0, 5.0], &centered).unwrap();
        assert_eq!(lam, vec![10.0, 0.0]);
    }
}
