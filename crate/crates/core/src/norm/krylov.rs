//! Largest singular value of a matrix-free operator, by Krylov iteration on
//! the Gram operator `M^H M`.
//!
//! Plain power iteration converges at the rate `(σ₂/σ₁)²` per step, which is
//! slow for the nearly degenerate even/odd singular pairs of symmetric
//! problems. The Krylov space of the same Gram iterates (Lanczos with full
//! reorthogonalization) reaches the same fixed point far sooner; restarts use
//! the current Ritz vector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A linear map `C^n → C^n` with its adjoint.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64>;
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KrylovSettings {
    /// relative tolerance on `σ₁²`
    pub tol: f64,
    pub max_subspace: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_subspace: 60,
            max_restarts: 30,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormIteration {
    pub value: f64,
    /// Gram applications
    pub iterations: usize,
    /// final residual of the Ritz pair relative to `σ₁²`
    pub residual: f64,
}

/// Deterministic seed from any textual description of a computation.
pub fn seed_from(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &mut [Complex64], s: f64) {
    for z in a.iter_mut() {
        *z *= s;
    }
}

pub fn operator_norm<M: LinearMap + ?Sized>(op: &M, settings: &KrylovSettings) -> Result<NormIteration> {
    let n = op.dim();
    if n == 0 {
        return Ok(NormIteration {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut start: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let s = norm(&start);
    scale(&mut start, 1.0 / s);
    let gram = |x: &[Complex64]| op.apply_adjoint(&op.apply(x));
    let m = settings.max_subspace.min(n).max(1);
    let mut applications = 0;
    let mut last_residual = f64::INFINITY;
    for _ in 0..=settings.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut ritz_vec = vec![1.0];
        for j in 0..m {
            let mut w = gram(&basis[j]);
            applications += 1;
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
            }
            let b = norm(&w);
            let k = alpha.len();
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (imax, &tmax) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            let theta = tmax.max(0.0);
            ritz_vec = eig.eigenvectors.column(imax).iter().copied().collect();
            let residual = b * ritz_vec[k - 1].abs();
            last_residual = if theta > 0.0 { residual / theta } else { residual };
            if theta == 0.0 && b == 0.0 {
                return Ok(NormIteration {
                    value: 0.0,
                    iterations: applications,
                    residual: 0.0,
                });
            }
            if residual <= settings.tol * theta || b <= 1e-300 {
                return Ok(NormIteration {
                    value: theta.sqrt(),
                    iterations: applications,
                    residual: last_residual,
                });
            }
            if j + 1 < m {
                beta.push(b);
                scale(&mut w, 1.0 / b);
                basis.push(w);
            }
        }
        // restart from the Ritz vector
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for (c, v) in ritz_vec.iter().zip(&basis) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += *c * vi;
            }
        }
        let s = norm(&y);
        scale(&mut y, 1.0 / s);
        start = y;
    }
    Err(Error::PowerIterationStagnation {
        iterations: applications,
        change: last_residual,
    })
}

/// Dense matrix of a linear map, column by column.
pub fn dense_matrix<M: LinearMap + ?Sized>(op: &M) -> DMatrix<Complex64> {
    let n = op.dim();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    let mut e = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        e[j] = Complex64::new(1.0, 0.0);
        let col = op.apply(&e);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
        e[j] = Complex64::new(0.0, 0.0);
    }
    out
}

/// Largest singular value by dense SVD; an oracle for small problems.
pub fn dense_norm<M: LinearMap + ?Sized>(op: &M) -> f64 {
    let m = dense_matrix(op);
    if m.nrows() == 0 {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<Complex64>);

    impl LinearMap for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
            (&self.0 * nalgebra::DVector::from_column_slice(x))
                .iter()
                .copied()
                .collect()
        }
        fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
            (self.0.adjoint() * nalgebra::DVector::from_column_slice(x))
                .iter()
                .copied()
                .collect()
        }
    }

    #[test]
    fn matches_dense_svd() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let op = Dense(m);
        let k = operator_norm(&op, &KrylovSettings::default()).unwrap();
        let d = dense_norm(&op);
        assert!((k.value - d).abs() <= 1e-9 * d, "{} vs {d}", k.value);
    }

    #[test]
    fn nearly_degenerate_pair() {
        let n = 30;
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(if i < 2 { 1.0 - 1e-9 * i as f64 } else { 0.5 }, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let k = operator_norm(&Dense(m), &KrylovSettings::default()).unwrap();
        assert!((k.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_operator() {
        let op = Dense(DMatrix::zeros(5, 5));
        assert_eq!(operator_norm(&op, &KrylovSettings::default()).unwrap().value, 0.0);
    }

    #[test]
    fn seeds_are_stable() {
        assert_eq!(seed_from("abc"), seed_from("abc"));
        assert_ne!(seed_from("abc"), seed_from("abd"));
    }
}
