//! Dense symmetric indefinite factorization (Bunch–Kaufman diagonal pivoting)
//! and a few small helpers shared by the fitting code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Step {
    k: usize,
    size: usize,
    swap_from: usize,
    swap_to: usize,
}

/// `P S A S Pᵀ = L B Lᵀ` with `S` a symmetric diagonal equilibration, `L` unit
/// lower triangular and `B` block diagonal with 1×1 and 2×2 blocks.
#[derive(Debug, Clone)]
pub struct SymmetricIndefinite {
    n: usize,
    factors: DMatrix<f64>,
    steps: Vec<Step>,
    scale: Vec<f64>,
    original: DMatrix<f64>,
}

const BK_ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

impl SymmetricIndefinite {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("matrix is not square"));
        }
        let mut scale = vec![0.0; n];
        for (i, s) in scale.iter_mut().enumerate() {
            let m = a.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if m == 0.0 || !m.is_finite() {
                return Err(Error::numerical(format!(
                    "row {i} of the system matrix is zero or non-finite"
                )));
            }
            *s = 1.0 / m.sqrt();
        }
        let mut f = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
        // Only exact breakdown is reported here; near-singularity shows up in the
        // refined residual, which callers check.
        let tiny = f64::MIN_POSITIVE;
        let mut steps = Vec::with_capacity(n);
        let mut k = 0;
        let mut col = vec![0.0; n];
        let mut col2 = vec![0.0; n];
        while k < n {
            let absakk = f[(k, k)].abs();
            let (imax, colmax) = (k + 1..n)
                .map(|i| (i, f[(i, k)].abs()))
                .fold((k, 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            if absakk.max(colmax) <= tiny {
                return Err(Error::numerical(format!(
                    "singular system matrix (zero pivot column {k}); try a small lambda jitter or merging knots"
                )));
            }
            let (kp, size) = if absakk >= BK_ALPHA * colmax {
                (k, 1)
            } else {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| f[(imax, j)].abs())
                    .fold(0.0, f64::max);
                if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                    (k, 1)
                } else if f[(imax, imax)].abs() >= BK_ALPHA * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + size - 1;
            if kp != kk {
                f.swap_rows(kp, kk);
                f.swap_columns(kp, kk);
            }
            steps.push(Step {
                k,
                size,
                swap_from: kk,
                swap_to: kp,
            });
            let data = f.as_mut_slice();
            if size == 1 {
                let d = data[k * n + k];
                if d.abs() <= tiny {
                    return Err(Error::numerical(format!(
                        "singular system matrix (pivot {k}); try a small lambda jitter or merging knots"
                    )));
                }
                col[k + 1..n].copy_from_slice(&data[k * n + k + 1..k * n + n]);
                for j in k + 1..n {
                    let vj = col[j];
                    if vj == 0.0 {
                        continue;
                    }
                    let c = vj / d;
                    let dst = &mut data[j * n + k + 1..j * n + n];
                    for (x, &vi) in dst.iter_mut().zip(&col[k + 1..n]) {
                        *x -= vi * c;
                    }
                }
                for i in k + 1..n {
                    data[k * n + i] = col[i] / d;
                }
            } else {
                let d11 = data[k * n + k];
                let d21 = data[k * n + k + 1];
                let d22 = data[(k + 1) * n + k + 1];
                let det = d11 * d22 - d21 * d21;
                if !(det.abs() > tiny) {
                    return Err(Error::numerical(format!(
                        "singular 2x2 pivot block at {k}; try a small lambda jitter or merging knots"
                    )));
                }
                col[k + 2..n].copy_from_slice(&data[k * n + k + 2..k * n + n]);
                col2[k + 2..n].copy_from_slice(&data[(k + 1) * n + k + 2..(k + 1) * n + n]);
                // multipliers l = [col col2] * B^{-1}
                let mut l1 = vec![0.0; n];
                let mut l2 = vec![0.0; n];
                for i in k + 2..n {
                    l1[i] = (col[i] * d22 - col2[i] * d21) / det;
                    l2[i] = (col2[i] * d11 - col[i] * d21) / det;
                }
                for j in k + 2..n {
                    let (a, b) = (col[j], col2[j]);
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    let dst = &mut data[j * n + k + 2..j * n + n];
                    for (idx, x) in dst.iter_mut().enumerate() {
                        let i = idx + k + 2;
                        *x -= l1[i] * a + l2[i] * b;
                    }
                }
                for i in k + 2..n {
                    data[k * n + i] = l1[i];
                    data[(k + 1) * n + i] = l2[i];
                }
            }
            k += size;
        }
        Ok(Self {
            n,
            factors: f,
            steps,
            scale,
            original: a.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_scaled(&self, b: &mut [f64]) {
        let n = self.n;
        let f = self.factors.as_slice();
        for st in &self.steps {
            b.swap(st.swap_from, st.swap_to);
        }
        for st in &self.steps {
            let k = st.k;
            if st.size == 1 {
                let bk = b[k];
                for i in k + 1..n {
                    b[i] -= f[k * n + i] * bk;
                }
            } else {
                let (b0, b1) = (b[k], b[k + 1]);
                for i in k + 2..n {
                    b[i] -= f[k * n + i] * b0 + f[(k + 1) * n + i] * b1;
                }
            }
        }
        for st in &self.steps {
            let k = st.k;
            if st.size == 1 {
                b[k] /= f[k * n + k];
            } else {
                let d11 = f[k * n + k];
                let d21 = f[k * n + k + 1];
                let d22 = f[(k + 1) * n + k + 1];
                let det = d11 * d22 - d21 * d21;
                let (b0, b1) = (b[k], b[k + 1]);
                b[k] = (d22 * b0 - d21 * b1) / det;
                b[k + 1] = (d11 * b1 - d21 * b0) / det;
            }
        }
        for st in self.steps.iter().rev() {
            let k = st.k;
            if st.size == 1 {
                let s: f64 = (k + 1..n).map(|i| f[k * n + i] * b[i]).sum();
                b[k] -= s;
            } else {
                let s0: f64 = (k + 2..n).map(|i| f[k * n + i] * b[i]).sum();
                let s1: f64 = (k + 2..n).map(|i| f[(k + 1) * n + i] * b[i]).sum();
                b[k] -= s0;
                b[k + 1] -= s1;
            }
        }
        for st in self.steps.iter().rev() {
            b.swap(st.swap_from, st.swap_to);
        }
    }

    fn solve_once(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut b: Vec<f64> = rhs.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        self.solve_scaled(&mut b);
        DVector::from_iterator(self.n, b.iter().zip(&self.scale).map(|(v, s)| v * s))
    }

    /// Solves `A x = rhs` with two steps of iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve_once(rhs);
        for _ in 0..2 {
            let r = rhs - &self.original * &x;
            x += self.solve_once(&r);
        }
        x
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenpairs sorted by
/// descending eigenvalue.
pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Flips the sign of each column so that its first entry of non-negligible
/// magnitude is positive.
pub(crate) fn canonical_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let tol = col.amax() * 1e-10;
        if let Some(first) = col.iter().find(|x| x.abs() > tol).copied() {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m + m.transpose()
    }

    #[test]
    fn matches_lu_on_random_indefinite_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 17, 40] {
            let a = random_symmetric(n, &mut rng);
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let x = SymmetricIndefinite::factor(&a).unwrap().solve(&b);
            let oracle = a.clone().lu().solve(&b).unwrap();
            assert!((&x - &oracle).norm() <= 1e-9 * oracle.norm().max(1.0), "n={n}");
        }
    }

    #[test]
    fn saddle_point_with_zero_block() {
        // [[2, 1], [1, 0]] needs either a swap or a 2x2 pivot
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = SymmetricIndefinite::factor(&a).unwrap().solve(&b);
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(SymmetricIndefinite::factor(&a).is_err());
    }
}
