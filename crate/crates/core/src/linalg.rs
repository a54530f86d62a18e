//! Sparse direct solves, the stabilized L2 projection and condition numbers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Col, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{assemble_load_with, CsrMatrix};
use crate::geometry::QuadratureSet;
use crate::space::{BrokenSpace, FeFunction};
use crate::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("matrix is not square ({0} x {1})")]
    NotSquare(usize, usize),
    #[error("right-hand side has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solve did not reach the residual bound: residual {residual:.3e} > bound {bound:.3e}")]
    Residual { residual: f64, bound: f64 },
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("{method} did not converge after {iterations} iterations (last relative change {change:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        change: f64,
    },
    #[error("singular value decomposition failed")]
    Svd,
}

enum Factors {
    Lu(Lu<usize, f64>),
    Llt(Llt<usize, f64>),
}

/// Reusable direct factorization with residual-certified solves.
pub struct Factorization {
    matrix: CsrMatrix,
    factors: Factors,
    norm: f64,
}

fn to_col(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

fn from_col(c: &Col<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Factorization {
    /// Sparse LU with partial pivoting.
    pub fn lu(a: &CsrMatrix) -> Result<Self, SolveError> {
        if !a.is_square() {
            return Err(SolveError::NotSquare(a.n_rows, a.n_cols));
        }
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        Ok(Factorization {
            matrix: a.clone(),
            factors: Factors::Lu(lu),
            norm: a.frobenius_norm(),
        })
    }

    /// Sparse Cholesky; fails unless `a` is symmetric positive definite.
    pub fn cholesky(a: &CsrMatrix) -> Result<Self, SolveError> {
        if !a.is_square() {
            return Err(SolveError::NotSquare(a.n_rows, a.n_cols));
        }
        if a.symmetry_defect() > 1e-12 * a.max_abs() {
            return Err(SolveError::NotSpd);
        }
        let llt = a.to_faer().sp_cholesky(Side::Lower).map_err(|_| SolveError::NotSpd)?;
        Ok(Factorization {
            matrix: a.clone(),
            factors: Factors::Llt(llt),
            norm: a.frobenius_norm(),
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One application of the factors, no refinement.
    pub fn solve_raw(&self, rhs: &[f64]) -> Vec<f64> {
        let b = to_col(rhs);
        let x = match &self.factors {
            Factors::Lu(f) => f.solve(&b),
            Factors::Llt(f) => f.solve(&b),
        };
        from_col(&x)
    }

    /// Solve with the transposed matrix.
    pub fn solve_transpose_raw(&self, rhs: &[f64]) -> Vec<f64> {
        let b = to_col(rhs);
        let x = match &self.factors {
            Factors::Lu(f) => f.solve_transpose(&b),
            Factors::Llt(f) => f.solve_transpose(&b),
        };
        from_col(&x)
    }

    /// Solve with up to three steps of iterative refinement; the result
    /// satisfies `‖Ax − b‖ ≤ 1e-10 (‖A‖‖x‖ + ‖b‖)` or an error is returned.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        if rhs.len() != self.n() {
            return Err(SolveError::DimensionMismatch {
                expected: self.n(),
                got: rhs.len(),
            });
        }
        let mut x = self.solve_raw(rhs);
        let bnorm = norm2(rhs);
        let mut last = (f64::INFINITY, 0.0);
        for step in 0..=3 {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = norm2(&r);
            let bound = 1e-10 * (self.norm * norm2(&x) + bnorm);
            last = (res, bound);
            if res.is_finite() && res <= bound {
                return Ok(x);
            }
            if step == 3 || !res.is_finite() {
                break;
            }
            let dx = self.solve_raw(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Err(SolveError::Residual {
            residual: last.0,
            bound: last.1,
        })
    }
}

/// One-shot LU solve with residual certification.
pub fn solve(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    if rhs.len() != a.n_rows {
        return Err(SolveError::DimensionMismatch {
            expected: a.n_rows,
            got: rhs.len(),
        });
    }
    Factorization::lu(a)?.solve(rhs)
}

/// Moments `(u0, φ_i)_Ω` over the cut volume rules.
pub fn cut_moments(space: &BrokenSpace, quad: &QuadratureSet, u0: &(dyn Fn(Vec2) -> f64 + Sync)) -> Vec<f64> {
    assemble_load_with(space, &|_| Vec2::zeros(), quad, u0, &|_| 0.0)
}

/// Solves `M c = ((u0, φ_i)_Ω)_i` with the stabilized mass matrix.
pub fn stabilized_l2_projection<'s>(
    mass: &CsrMatrix,
    u0: &(dyn Fn(Vec2) -> f64 + Sync),
    space: &'s BrokenSpace,
    quad: &QuadratureSet,
) -> Result<FeFunction<'s>, SolveError> {
    let fact = Factorization::cholesky(mass)?;
    let rhs = cut_moments(space, quad, u0);
    Ok(space.function(fact.solve(&rhs)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionMode {
    /// Full singular value decomposition.
    DenseExact,
    /// Lanczos on `AᵀA` for `σ_max` and on `(AᵀA)⁻¹` for `σ_min`.
    Iterative,
    /// Dense up to `DENSE_LIMIT` unknowns, iterative beyond.
    Auto,
}

pub const DENSE_LIMIT: usize = 4000;

/// Spectral condition number `σ_max / σ_min` in the coefficient 2-norm.
pub fn condition_number(a: &CsrMatrix, mode: ConditionMode) -> Result<f64, SolveError> {
    if !a.is_square() {
        return Err(SolveError::NotSquare(a.n_rows, a.n_cols));
    }
    let dense = match mode {
        ConditionMode::DenseExact => true,
        ConditionMode::Iterative => false,
        ConditionMode::Auto => a.n_rows <= DENSE_LIMIT,
    };
    if dense {
        let s = a.to_faer_dense().singular_values().map_err(|_| SolveError::Svd)?;
        let max = s.iter().copied().fold(0.0, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(if min == 0.0 { f64::INFINITY } else { max / min })
    } else {
        let smax = sigma_max(a)?;
        let smin = sigma_min(a)?;
        Ok(smax / smin)
    }
}

const TOL: f64 = 1e-6;
const MAX_KRYLOV: usize = 400;

fn start_vector(n: usize) -> Vec<f64> {
    // deterministic, generic start
    let v: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract()).collect();
    let s = norm2(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// Lanczos with full reorthogonalization. Converged when the Ritz residual
/// bound `|β_m s_m|` drops below `TOL θ`.
fn largest_eigenvalue(n: usize, method: &'static str, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64, SolveError> {
    let max_steps = n.min(MAX_KRYLOV);
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut change = f64::INFINITY;
    for m in 0..max_steps {
        let mut w = apply(&basis[m]);
        let a = basis[m].iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = q.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm2(&w);
        let k = alpha.len();
        let last = k == max_steps || b <= 1e-14 * a.abs();
        if k % 10 != 0 && !last {
            beta.push(b);
            basis.push(w.into_iter().map(|v| v / b).collect());
            continue;
        }
        let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(t);
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if !theta.is_finite() {
            return Err(SolveError::NoConvergence { method, iterations: m + 1, change });
        }
        change = (b * eig.eigenvectors[(k - 1, top)]).abs() / theta.abs().max(f64::MIN_POSITIVE);
        if change < TOL || last {
            return Ok(theta);
        }
        beta.push(b);
        basis.push(w.into_iter().map(|v| v / b).collect());
    }
    Err(SolveError::NoConvergence {
        method,
        iterations: max_steps,
        change,
    })
}

fn sigma_max(a: &CsrMatrix) -> Result<f64, SolveError> {
    let l = largest_eigenvalue(a.n_rows, "Lanczos iteration", |x| a.matvec_transpose(&a.matvec(x)))?;
    Ok(l.sqrt())
}

fn sigma_min(a: &CsrMatrix) -> Result<f64, SolveError> {
    let f = Factorization::lu(a)?;
    let l = largest_eigenvalue(a.n_rows, "inverse Lanczos iteration", |x| f.solve_raw(&f.solve_transpose_raw(x)))?;
    Ok(1.0 / l.sqrt())
}
