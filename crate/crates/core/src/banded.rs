//! Banded matrices and LU factorization with partial pivoting.
//!
//! Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl`
//! super-diagonals hold the fill-in produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku + self.kl || j >= self.n {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Sets entry `(i, j)`; panics outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku && j < self.n,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j).unwrap();
        self.data[s] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let v = self.get(i, j);
        self.set(i, j, v + value);
    }

    fn row_range(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kl)..=(i + self.ku).min(self.n - 1)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Writes `y = A x` into `out`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_range(i).map(|j| self.get(i, j) * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu> {
        BandedLu::new(self.clone())
    }
}

/// LU factors of a [`BandMatrix`], `P A = L U`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    u: BandMatrix,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn new(mut a: BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let reach = a.ku + a.kl;
        let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = a.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * f64::EPSILON * n as f64) {
                return Err(Error::SingularMatrix(k));
            }
            pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let sk = a.slot(k, j).unwrap();
                    let sp = a.slot(p, j).unwrap();
                    a.data.swap(sk, sp);
                }
            }
            let pivot = a.get(k, k);
            for i in k + 1..=last_row {
                let l = a.get(i, k) / pivot;
                multipliers[k * kl + (i - k - 1)] = l;
                let s = a.slot(i, k).unwrap();
                a.data[s] = 0.0;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let skj = a.slot(k, j).unwrap();
                        let sij = a.slot(i, j).unwrap();
                        a.data[sij] -= l * a.data[skj];
                    }
                }
            }
        }
        Ok(Self {
            u: a,
            multipliers,
            pivots,
        })
    }

    pub fn size(&self) -> usize {
        self.u.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.u.n;
        let kl = self.u.kl;
        let reach = self.u.ku + kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.multipliers[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= self.u.get(k, j) * b[j];
            }
            b[k] = acc / self.u.get(k, k);
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
