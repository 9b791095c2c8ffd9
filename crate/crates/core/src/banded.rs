//! Banded LU with partial pivoting (LINPACK-style interleaved pivots).

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals; storage leaves room
/// for the extra `kl` super-diagonals created by row interchanges.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Accumulate `v` into entry `(i, j)`, which must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Solve `A x = b`, consuming the matrix.
    pub fn solve(mut self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, kl) = (self.n, self.kl);
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let reach = self.ku + self.kl;
        let mut piv = vec![0usize; n];
        let mut low = vec![0.0; n * kl.max(1)];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in (k + 1)..=last {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 1e-300 + 1e-15 * scale) {
                return Err(Error::Degenerate("singular banded system"));
            }
            piv[k] = p;
            let right = (k + reach).min(n - 1);
            if p != k {
                for c in k..=right {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(k, k)];
            for r in (k + 1)..=last {
                let s = self.slot(r, k);
                let m = self.data[s] / d;
                self.data[s] = 0.0;
                low[r * kl.max(1) + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in (k + 1)..=right {
                        let (dst, src) = (self.slot(r, c), self.slot(k, c));
                        self.data[dst] -= m * self.data[src];
                    }
                }
            }
        }
        let mut x = b.clone();
        for k in 0..n {
            x.swap_rows(k, piv[k]);
            let xk = x[k];
            for r in (k + 1)..=(k + kl).min(n - 1) {
                x[r] -= low[r * kl.max(1) + (r - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for c in (k + 1)..=(k + reach).min(n - 1) {
                acc -= self.data[self.slot(k, c)] * x[c];
            }
            x[k] = acc / self.data[self.slot(k, k)];
        }
        Ok(x)
    }
}
