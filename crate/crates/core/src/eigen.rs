//! Dense square matrices and the shifted power iteration for EigMax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Iteration cap for the power iteration.
pub const EIGMAX_MAX_ITERATIONS: usize = 100_000;
/// Stop once the Rayleigh quotient moves by less than this.
pub const EIGMAX_RAYLEIGH_TOLERANCE: f64 = 1e-12;
/// Residual `‖Bx − θx‖` required at the stopping point, relative to the shift.
pub const EIGMAX_RESIDUAL_TOLERANCE: f64 = 1e-6;
/// Largest `|a_ij − a_ji|` for which the dense symmetric fallback applies.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
const START_SEED: u64 = 0x5eed_e16e;

/// A dense real square matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("matrix must be square".into()));
        }
        Ok(DenseMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] = x;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).take(self.n).collect()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Largest eigenvalue together with the `∞`-norm bound it never exceeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigMax {
    pub value: f64,
    pub inf_norm: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a matrix with real spectrum.
///
/// Power iteration on `A + sI` with `s = ‖A‖_∞`, which moves the spectrum into
/// `[0, 2s]` so the largest eigenvalue dominates in modulus.
pub fn eigmax(a: &DenseMatrix) -> Result<EigMax> {
    let n = a.dim();
    let s = a.inf_norm();
    if n == 0 || s == 0.0 {
        return Ok(EigMax {
            value: 0.0,
            inf_norm: s,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut x);
    let mut y = vec![0.0; n];
    let mut theta_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 1..=EIGMAX_MAX_ITERATIONS {
        a.mul_vec(&x, &mut y);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += s * xi;
        }
        let theta: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        residual = x.iter().zip(&y).map(|(xi, yi)| (yi - theta * xi).powi(2)).sum::<f64>().sqrt();
        if (theta - theta_prev).abs() < EIGMAX_RAYLEIGH_TOLERANCE && residual <= EIGMAX_RESIDUAL_TOLERANCE * s {
            return Ok(EigMax {
                value: theta - s,
                inf_norm: s,
                iterations: it,
            });
        }
        theta_prev = theta;
        std::mem::swap(&mut x, &mut y);
        normalize(&mut x);
    }
    if let Some(value) = symmetric_eigmax(a) {
        return Ok(EigMax {
            value,
            inf_norm: s,
            iterations: EIGMAX_MAX_ITERATIONS,
        });
    }
    Err(Error::NonConvergence {
        what: "EigMax power iteration".into(),
        iterations: EIGMAX_MAX_ITERATIONS,
        residual,
    })
}

/// Largest eigenvalue of a symmetric matrix by a dense symmetric solver, used
/// when a near tie at the top of the spectrum stalls the power iteration.
fn symmetric_eigmax(a: &DenseMatrix) -> Option<f64> {
    let n = a.dim();
    let asym = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (a.get(i, j) - a.get(j, i)).abs())
        .fold(0.0, f64::max);
    if asym > SYMMETRY_TOLERANCE {
        return None;
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, a.data());
    let m = (&m + m.transpose()) * 0.5;
    Some(m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_matrix() {
        assert_eq!(eigmax(&DenseMatrix::zeros(3)).unwrap().value, 0.0);
    }

    #[test]
    fn symmetric_two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_abs_diff_eq!(eigmax(&m).unwrap().value, 0.5, epsilon = 1e-9);
        let c = -2.0 / 51.0;
        let m = DenseMatrix::from_rows(&[vec![0.0, c], vec![c, 0.0]]).unwrap();
        assert_abs_diff_eq!(eigmax(&m).unwrap().value, 2.0 / 51.0, epsilon = 1e-9);
    }

    #[test]
    fn non_symmetric_real_spectrum() {
        // Upper triangular with eigenvalues 0.3 and -0.7.
        let m = DenseMatrix::from_rows(&[vec![0.3, 2.0], vec![0.0, -0.7]]).unwrap();
        assert_abs_diff_eq!(eigmax(&m).unwrap().value, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn near_tie_at_the_top() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0 - 1e-5]]).unwrap();
        assert_abs_diff_eq!(eigmax(&m).unwrap().value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn inf_norm_is_max_row_sum() {
        let m = DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.inf_norm(), 3.0);
    }
}
