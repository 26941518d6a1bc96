//! Gaussian measurement matrices and linear measurements.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// Measurement operator `A` (m x n, i.i.d. N(0, 1)) plus the regularizer
/// weight `lambda` of the recovery objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSystem {
    matrix: DMatrix<f64>,
    seed: u64,
    lambda: f64,
}

impl SensingSystem {
    pub fn gaussian(m: usize, n: usize, seed: u64, lambda: f64) -> Result<Self> {
        Self::from_matrix(generate_matrix(m, n, seed)?, seed, lambda)
    }

    pub fn from_matrix(matrix: DMatrix<f64>, seed: u64, lambda: f64) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Shape("sensing matrix must be non-empty".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "regularizer must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            matrix,
            seed,
            lambda,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        measure(&self.matrix, x)
    }
}

/// m x n standard normal matrix, filled row by row from a seeded stream.
pub fn generate_matrix(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::Shape(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut rng = seeding::stream(seed);
    let entries: Vec<f64> = (0..m * n)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok(DMatrix::from_row_slice(m, n, &entries))
}

/// Accumulates `A x` column by column in coordinate order, skipping zero
/// coordinates.
pub(crate) fn accumulate_columns(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (o, &aij) in out.iter_mut().zip(a.column(j).iter()) {
                *o += aij * xj;
            }
        }
    }
}

/// Computes `A x - y`, with `A x` accumulated exactly as [`measure`] does.
///
/// Every cost evaluation in the crate goes through this routine, so the same
/// sequence always yields bit-identical residuals, and a grid sequence
/// measured without noise has residual exactly zero.
pub(crate) fn residual_into(a: &DMatrix<f64>, x: &[f64], y: &[f64], out: &mut [f64]) {
    accumulate_columns(a, x, out);
    for (o, &yi) in out.iter_mut().zip(y) {
        *o -= yi;
    }
}

pub fn measure(a: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.ncols() {
        return Err(Error::Shape(format!(
            "signal has length {}, matrix has {} columns",
            x.len(),
            a.ncols()
        )));
    }
    let mut y = vec![0.0; a.nrows()];
    accumulate_columns(a, x, &mut y);
    Ok(y)
}

/// `||A u - y||^2`.
pub fn residual_norm_sq(a: &DMatrix<f64>, u: &[f64], y: &[f64]) -> Result<f64> {
    if u.len() != a.ncols() || y.len() != a.nrows() {
        return Err(Error::Shape(format!(
            "matrix is {}x{}, got u of length {} and y of length {}",
            a.nrows(),
            a.ncols(),
            u.len(),
            y.len()
        )));
    }
    let mut r = vec![0.0; a.nrows()];
    residual_into(a, u, y, &mut r);
    Ok(r.iter().map(|v| v * v).sum())
}

const POWER_ITERATION_CAP: usize = 100_000;

/// Largest singular value by power iteration on the smaller Gram matrix.
pub fn max_singular_value(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let dim = gram.nrows();
    // fixed start vector with no symmetry
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut eig = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - eig).abs() <= 1e-15 * next.abs() {
            return Ok(next.max(0.0).sqrt());
        }
        eig = next;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {POWER_ITERATION_CAP} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_matrix(5, 7, 3).unwrap();
        assert_eq!(a, generate_matrix(5, 7, 3).unwrap());
        assert_ne!(a, generate_matrix(5, 7, 4).unwrap());
        assert!(generate_matrix(0, 3, 1).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let a = generate_matrix(200, 200, 11).unwrap();
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn measurement_basics() {
        let a = generate_matrix(4, 6, 1).unwrap();
        assert_eq!(measure(&a, &[0.0; 6]).unwrap(), vec![0.0; 4]);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(
            measure(&eye, &[1.0, -2.0, 0.5]).unwrap(),
            vec![1.0, -2.0, 0.5]
        );
        let x = [0.5, 0.25, -1.0, 0.0, 2.0, 0.125];
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y = measure(&a, &x).unwrap();
        let y2 = measure(&a, &x2).unwrap();
        for (p, q) in y.iter().zip(&y2) {
            assert_eq!(2.0 * p, *q);
        }
        assert!(matches!(measure(&a, &[1.0; 5]), Err(Error::Shape(_))));
    }

    #[test]
    fn residual_matches_double_loop() {
        let a = generate_matrix(6, 9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut direct = 0.0;
        for i in 0..6 {
            let mut s = 0.0;
            for j in 0..9 {
                s += a[(i, j)] * u[j];
            }
            direct += (s - y[i]).powi(2);
        }
        assert!((residual_norm_sq(&a, &u, &y).unwrap() - direct).abs() < 1e-10);

        let exact = measure(&a, &u).unwrap();
        assert_eq!(residual_norm_sq(&a, &u, &exact).unwrap(), 0.0);

        let mut e = vec![0.0; 9];
        e[4] = 1.0;
        let col: f64 = a.column(4).iter().map(|v| v * v).sum();
        assert!((residual_norm_sq(&a, &e, &[0.0; 6]).unwrap() - col).abs() < 1e-12);
        assert!(residual_norm_sq(&a, &e, &[0.0; 5]).is_err());
    }

    #[test]
    fn singular_value_examples() {
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((max_singular_value(&eye).unwrap() - 1.0).abs() < 1e-12);
        let diag = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((max_singular_value(&diag).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_value_matches_svd() {
        for seed in 0..5 {
            let a = generate_matrix(30, 50, seed).unwrap();
            let svd = a.clone().svd(false, false);
            let reference = svd.singular_values.max();
            let est = max_singular_value(&a).unwrap();
            assert!(
                (est - reference).abs() <= 1e-8 * reference,
                "{est} vs {reference}"
            );
        }
    }

    #[test]
    fn operator_norm_bound() {
        let a = generate_matrix(20, 40, 8).unwrap();
        let smax = max_singular_value(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
            let au = measure(&a, &u).unwrap();
            let lhs = au.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rhs = smax * u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-8));
        }
    }

    #[test]
    fn system_validation() {
        assert!(SensingSystem::gaussian(3, 4, 1, 0.0).is_err());
        let s = SensingSystem::gaussian(3, 4, 1, 2.0).unwrap();
        assert_eq!((s.m(), s.n(), s.seed(), s.lambda()), (3, 4, 1, 2.0));
    }
}
