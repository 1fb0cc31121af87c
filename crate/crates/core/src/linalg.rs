//! Direct solvers for the banded systems produced by the difference stencils.
//!
//! The Jacobians are tridiagonal in 1D and have bandwidth `nx - 2` in 2D.
//! Tridiagonal systems go through the Thomas recursion; anything else, and
//! any tridiagonal system that meets a vanishing pivot without row exchanges,
//! goes through banded LU with partial pivoting.

use crate::{Error, Result};

/// Pivots smaller than this fraction of the largest entry are treated as zero.
const PIVOT_FLOOR: f64 = 1e-15;

/// Square matrix stored by diagonals: entry `(i, j)` is kept when
/// `-kl <= j - i <= ku`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.slot(i, j);
        self.data[k] = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.slot(i, j);
        self.data[k] += value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for j in lo..=hi {
                out[i * self.n + j] = self.get(i, j);
            }
        }
        out
    }

    /// Factorization used by [`Factorization::solve`]; tridiagonal matrices
    /// try the Thomas recursion first.
    pub fn factor(&self) -> Result<Factorization> {
        if self.kl == 1 && self.ku == 1 {
            if let Ok(t) = Tridiagonal::from_band(self) {
                return Ok(Factorization::Thomas(t));
            }
        }
        BandLu::new(self).map(Factorization::Banded)
    }
}

#[derive(Debug, Clone)]
pub enum Factorization {
    Thomas(Tridiagonal),
    Banded(BandLu),
}

impl Factorization {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match self {
            Factorization::Thomas(t) => t.solve(rhs),
            Factorization::Banded(lu) => lu.solve(rhs),
        }
    }
}

/// Thomas recursion with the forward sweep precomputed.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    denom: Vec<f64>,
    upper_mod: Vec<f64>,
}

impl Tridiagonal {
    fn from_band(m: &BandMatrix) -> Result<Self> {
        let n = m.dim();
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let mut lower = vec![0.0; n];
        let mut denom = vec![0.0; n];
        let mut upper_mod = vec![0.0; n];
        for i in 0..n {
            let a = if i > 0 { m.get(i, i - 1) } else { 0.0 };
            let c = if i + 1 < n { m.get(i, i + 1) } else { 0.0 };
            let prev = if i > 0 { upper_mod[i - 1] } else { 0.0 };
            let d = m.get(i, i) - a * prev;
            if !d.is_finite() || d.abs() <= PIVOT_FLOOR * scale {
                return Err(Error::Singular { row: i });
            }
            lower[i] = a;
            denom[i] = d;
            upper_mod[i] = c / d;
        }
        Ok(Self {
            lower,
            denom,
            upper_mod,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.denom.len();
        assert_eq!(rhs.len(), n);
        let mut x = vec![0.0; n];
        for i in 0..n {
            let prev = if i > 0 { x[i - 1] } else { 0.0 };
            x[i] = (rhs[i] - self.lower[i] * prev) / self.denom[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.upper_mod[i] * x[i + 1];
        }
        x
    }
}

/// Solves the tridiagonal system with sub-diagonal `sub` (`sub[0]` unused),
/// diagonal `diag` and super-diagonal `sup` (`sup[n-1]` unused).
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut m = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        m.set(i, i, diag[i]);
        if i > 0 {
            m.set(i, i - 1, sub[i]);
        }
        if i + 1 < n {
            m.set(i, i + 1, sup[i]);
        }
    }
    Ok(Tridiagonal::from_band(&m)?.solve(rhs))
}

/// Banded LU with partial pivoting. Row exchanges widen the upper band to
/// `ku + kl`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width_u: usize,
    upper: Vec<f64>,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn new(m: &BandMatrix) -> Result<Self> {
        let n = m.dim();
        let kl = m.lower_bandwidth();
        let wu = m.upper_bandwidth() + kl;
        let w = kl + wu + 1;
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        // working rows hold columns i-kl ..= i+wu
        let idx = |i: usize, j: usize| i * w + (j + kl - i);
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + m.upper_bandwidth()).min(n.saturating_sub(1));
            for j in lo..=hi {
                a[idx(i, j)] = m.get(i, j);
            }
        }
        let mut multipliers = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = a[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !best.is_finite() || best <= PIVOT_FLOOR * scale {
                return Err(Error::Singular { row: k });
            }
            pivots[k] = p;
            let last_col = (k + wu).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    a.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = a[idx(k, k)];
            for r in k + 1..=last_row {
                let l = a[idx(r, k)] / piv;
                multipliers[k * kl + (r - k - 1)] = l;
                a[idx(r, k)] = 0.0;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        a[idx(r, j)] -= l * a[idx(k, j)];
                    }
                }
            }
        }
        // keep only the upper factor, columns i ..= i+wu
        let mut upper = vec![0.0; n * (wu + 1)];
        for i in 0..n {
            for j in i..=(i + wu).min(n - 1) {
                upper[i * (wu + 1) + (j - i)] = a[idx(i, j)];
            }
        }
        Ok(Self {
            n,
            kl,
            width_u: wu,
            upper,
            multipliers,
            pivots,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for r in k + 1..=(k + self.kl).min(n - 1) {
                x[r] -= self.multipliers[k * self.kl + (r - k - 1)] * xk;
            }
        }
        let w = self.width_u + 1;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.width_u).min(n - 1) {
                s -= self.upper[i * w + (j - i)] * x[j];
            }
            x[i] = s / self.upper[i * w];
        }
        x
    }
}

/// Dense Gaussian elimination with partial pivoting; `a` is row-major `n×n`.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|r| (r, a[r * n + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !best.is_finite() || best <= PIVOT_FLOOR * scale {
            return Err(Error::Singular { row: k });
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for r in k + 1..n {
            let l = a[r * n + k] / piv;
            if l == 0.0 {
                continue;
            }
            for j in k..n {
                a[r * n + j] -= l * a[k * n + j];
            }
            b[r] -= l * b[k];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * b[j]).sum();
        b[i] = (b[i] - s) / a[i * n + i];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn thomas_small_system() {
        let x = thomas_solve(
            &[0.0, -1.0, -1.0],
            &[2.0, 2.0, 2.0],
            &[-1.0, -1.0, 0.0],
            &[1.0, 0.0, 1.0],
        )
        .unwrap();
        assert!(max_err(&x, &[1.0, 1.0, 1.0]) < 1e-14);
    }

    #[test]
    fn banded_lu_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(12, 1, 1), (30, 4, 4), (25, 2, 5), (9, 0, 3)] {
            let m = random_band(n, kl, ku, &mut rng);
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = m.matvec(&x_true);
            let x = BandLu::new(&m).unwrap().solve(&b);
            let y = dense_solve(m.to_dense(), b.clone()).unwrap();
            assert!(max_err(&x, &x_true) < 1e-9, "{n} {kl} {ku}");
            assert!(max_err(&y, &x_true) < 1e-9);
        }
    }

    #[test]
    fn zero_leading_pivot_needs_row_exchange() {
        // [[0, 1], [1, 0]] defeats the Thomas sweep but not pivoted LU
        let mut m = BandMatrix::zeros(2, 1, 1);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        let f = m.factor().unwrap();
        assert!(matches!(f, Factorization::Banded(_)));
        let x = f.solve(&[2.0, 3.0]);
        assert!(max_err(&x, &[3.0, 2.0]) < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandMatrix::zeros(3, 1, 1);
        assert!(matches!(m.factor(), Err(Error::Singular { row: 0 })));
        assert!(dense_solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_err());
    }
}
