//! Banded matrices with an LU factorization using partial pivoting.

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage reserves `kl` extra super-diagonals for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl Band {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Band {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            piv: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i + self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// `self = I + alpha * other`, with `other` of the same shape.
    pub fn assign_shifted(&mut self, alpha: f64, other: &Band) {
        assert_eq!(self.n, other.n);
        for (d, o) in self.data.iter_mut().zip(&other.data) {
            *d = alpha * o;
        }
        for i in 0..self.n {
            self.add(i, i, 1.0);
        }
    }

    /// `y = A x` for an unfactored matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    /// In-place LU factorization. Returns false on an exactly singular pivot.
    pub fn factor(&mut self) -> bool {
        let n = self.n;
        let span = self.ku + self.kl;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[k] = p;
            if best == 0.0 || !best.is_finite() {
                return false;
            }
            let jmax = (k + span).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                self.set(i, k, l);
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let v = self.get(k, j);
                        let t = self.idx(i, j);
                        self.data[t] -= l * v;
                    }
                }
            }
        }
        true
    }

    /// Solve `A x = rhs` in place after [`Band::factor`].
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        let span = self.ku + self.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                rhs.swap(k, p);
            }
            let last = (k + self.kl).min(n - 1);
            let bk = rhs[k];
            for i in k + 1..=last {
                rhs[i] -= self.get(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + span).min(n - 1);
            let mut acc = rhs[i];
            for j in i + 1..=jmax {
                acc -= self.get(i, j) * rhs[j];
            }
            rhs[i] = acc / self.get(i, i);
        }
    }
}
