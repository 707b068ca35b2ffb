//! Banded storage with LU + partial pivoting (compact row storage).

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, a: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku || i >= self.n || j >= self.n {
            return None;
        }
        Some(i * (self.kl + self.ku + 1) + (j + self.kl - i))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.a[k])
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.a[k] = v;
    }

    /// Assemble a linear operator by probing it with coloured unit vectors.
    /// `op` must only couple columns within the declared band.
    pub fn from_operator<F>(n: usize, kl: usize, ku: usize, op: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let width = kl + ku + 1;
        let mut m = BandMatrix::zeros(n, kl, ku);
        let mut e = vec![0.0; n];
        for colour in 0..width.min(n) {
            e.iter_mut().for_each(|x| *x = 0.0);
            for j in (colour..n).step_by(width) {
                e[j] = 1.0;
            }
            let y = op(&e);
            for j in (colour..n).step_by(width) {
                let lo = j.saturating_sub(ku);
                let hi = (j + kl).min(n - 1);
                for (i, &v) in y.iter().enumerate().take(hi + 1).skip(lo) {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    /// Replace row `i` by the identity row (Dirichlet closure).
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, 0.0);
        }
        self.set(i, i, 1.0);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = 0.0;
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                s += self.get(i, j) * xj;
            }
            *yi = s;
        }
        y
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// Direct solve plus one round of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let lu = self.lu()?;
        let mut x = lu.solve(b);
        let ax = self.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        Ok(x)
    }
}

/// Row-pivoted LU of a band matrix (upper factor widened to kl+ku).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    mm: usize,
    a: Vec<f64>,
    al: Vec<f64>,
    indx: Vec<usize>,
}

impl BandLu {
    fn factor(m: &BandMatrix) -> Result<Self> {
        let (n, kl) = (m.n, m.kl);
        let mm = m.kl + m.ku + 1;
        let mut a = m.a.clone();
        // left-justify the first kl rows
        let mut l = kl;
        for i in 0..kl.min(n) {
            for j in (kl - i)..mm {
                a[i * mm + j - l] = a[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                a[i * mm + j] = 0.0;
            }
        }
        let klw = kl.max(1);
        let mut al = vec![0.0; n * klw];
        let mut indx = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut dum = a[k * mm];
            let mut piv = k;
            for j in (k + 1)..=last {
                if a[j * mm].abs() > dum.abs() {
                    dum = a[j * mm];
                    piv = j;
                }
            }
            indx[k] = piv;
            if dum == 0.0 {
                return Err(Error::Singular { row: k });
            }
            if piv != k {
                for j in 0..mm {
                    a.swap(k * mm + j, piv * mm + j);
                }
            }
            for i in (k + 1)..=last {
                let f = a[i * mm] / a[k * mm];
                al[k * klw + (i - k - 1)] = f;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - f * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(BandLu { n, kl, mm, a, al, indx })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, mm) = (self.n, self.kl, self.mm);
        let klw = kl.max(1);
        let mut b = rhs.to_vec();
        for k in 0..n {
            let j = self.indx[k];
            if j != k {
                b.swap(k, j);
            }
            let last = (k + kl).min(n - 1);
            for i in (k + 1)..=last {
                b[i] -= self.al[k * klw + (i - k - 1)] * b[k];
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in 1..mm.min(n - i) {
                s -= self.a[i * mm + c] * b[i + c];
            }
            b[i] = s / self.a[i * mm];
        }
        b
    }

    /// max|pivot| / min|pivot|, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..self.n {
            let p = self.a[i * self.mm].abs();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        hi / lo
    }
}
