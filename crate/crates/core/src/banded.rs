//! Symmetric positive definite banded systems (lower band storage).

use crate::error::{Error, Result};

/// `n x n` symmetric matrix with half-bandwidth `bw`; entry `(i, i - k)` is `band[i * (bw + 1) + k]`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    pub n: usize,
    pub bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    /// Adds `v` at `(i, j)`; only the lower triangle is stored, so pass each
    /// off-diagonal pair once.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        self.band[i * (self.bw + 1) + k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bw {
            0.0
        } else {
            self.band[i * (self.bw + 1) + k]
        }
    }

    /// In-place Cholesky `A = L L^T`, then solves for each right-hand side.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let (n, w) = (self.n, self.bw + 1);
        let b = &mut self.band;
        for i in 0..n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let mut s = b[i * w + (i - j)];
                let k0 = j0.max(j.saturating_sub(self.bw));
                for k in k0..j {
                    s -= b[i * w + (i - k)] * b[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NonConvergence(format!("matrix not positive definite at row {i}")));
                    }
                    b[i * w] = s.sqrt();
                } else {
                    b[i * w + (i - j)] = s / b[j * w];
                }
            }
        }
        for i in 0..n {
            let mut s = rhs[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= b[i * w + (i - k)] * rhs[k];
            }
            rhs[i] = s / b[i * w];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..(i + w).min(n) {
                s -= b[k * w + (k - i)] * rhs[k];
            }
            rhs[i] = s / b[i * w];
        }
        Ok(())
    }
}
