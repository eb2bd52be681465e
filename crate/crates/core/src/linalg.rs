//! Symmetric banded matrices and their Cholesky factorization.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Symmetric `n×n` matrix with `A[i][j] = 0` for `|i - j| > kd`.
///
/// Only the lower band is stored: `data[i * (kd + 1) + k] = A[i][i - k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, kd: usize) -> Self {
        let kd = kd.min(n.saturating_sub(1));
        Self {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn identity(n: usize, kd: usize) -> Self {
        let mut m = Self::zeros(n, kd);
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        (k <= self.kd).then_some(i * (self.kd + 1) + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to the symmetric pair `(i, j)` and `(j, i)`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.kd));
        self.data[s] += v;
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|x| *x *= a);
    }

    /// `self += a * other`; `other` must not be wider than `self`.
    pub fn axpy(&mut self, a: f64, other: &BandedSym) {
        assert_eq!(self.n, other.n);
        assert!(other.kd <= self.kd);
        for i in 0..self.n {
            for k in 0..=other.kd.min(i) {
                self.data[i * (self.kd + 1) + k] += a * other.data[i * (other.kd + 1) + k];
            }
        }
    }

    /// Copy with a wider band.
    pub fn widened(&self, kd: usize) -> BandedSym {
        let mut out = BandedSym::zeros(self.n, kd.max(self.kd));
        out.axpy(1.0, self);
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        let w = self.kd + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..=self.kd.min(i) {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
        y
    }

    pub fn mul_dvec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.mul_vec(x.as_slice()))
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Banded `L·Lᵀ` factorization in `O(n·kd²)`.
    pub fn cholesky(&self) -> Result<BandedCholesky, LinalgError> {
        let n = self.n;
        let kd = self.kd;
        let w = kd + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let mut d = l[j * w];
            for k in 1..=kd.min(j) {
                let v = l[j * w + k];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * w] = d;
            for i in (j + 1)..n.min(j + kd + 1) {
                // L[i][j] = (A[i][j] - Σ_{p<j} L[i][p] L[j][p]) / L[j][j]
                let mut s = l[i * w + (i - j)];
                let lo = i.saturating_sub(kd);
                for p in lo..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                l[i * w + (i - j)] = s / d;
            }
        }
        Ok(BandedCholesky { n, kd, l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let w = self.kd + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for k in 1..=self.kd.min(i) {
                s -= self.l[i * w + k] * b[i - k];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in 1..=self.kd.min(self.n - 1 - i) {
                s -= self.l[(i + k) * w + k] * b[i + k];
            }
            b[i] = s / self.l[i * w];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Smallest pivot squared; a cheap lower bound indicator for conditioning.
    pub fn min_pivot(&self) -> f64 {
        let w = self.kd + 1;
        (0..self.n)
            .map(|i| self.l[i * w] * self.l[i * w])
            .fold(f64::INFINITY, f64::min)
    }
}
