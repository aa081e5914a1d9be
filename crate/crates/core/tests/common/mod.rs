//! Test-only data generators and independent oracles. Nothing here calls
//! into the library's numerical kernels.

#![allow(dead_code, clippy::needless_range_loop)]

use factorforge::Matrix;

/// xorshift64* generator for test data.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn vec_uniform(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(lo, hi)).collect()
    }

    pub fn vec_normal(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn matrix_uniform(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        Matrix::new(rows, cols, self.vec_uniform(rows * cols, lo, hi)).unwrap()
    }
}

pub type Dense = Vec<Vec<f64>>;

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn dense_column(m: &Matrix, j: usize) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, j)).collect()
}

pub fn triple_loop_gram(w: &Dense) -> Dense {
    let rows = w.len();
    let cols = w[0].len();
    let mut s = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = 0.0;
            for r in 0..rows {
                acc += w[r][i] * w[r][j];
            }
            s[i][j] = acc;
        }
    }
    s
}

pub fn dense_matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| {
            let mut acc = 0.0;
            for j in 0..x.len() {
                acc += row[j] * x[j];
            }
            acc
        })
        .collect()
}

pub fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Eigenpairs of a symmetric PSD matrix by power iteration with Hotelling
/// deflation, largest first. Each pair is iterated until the iterate stops
/// moving (or the iteration cap is hit) and reported with its Rayleigh
/// quotient.
pub fn power_deflation(s: &Dense, max_iters: usize) -> Vec<(f64, Vec<f64>)> {
    let n = s.len();
    let mut a = s.clone();
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    let mut rng = TestRng::new(0xDEF1A7E);
    for _ in 0..n {
        let mut v = rng.vec_uniform(n, -1.0, 1.0);
        // keep the start vector off previously found directions
        for (_, u) in &pairs {
            let c = inner(&v, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
        let nv = l2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        for _ in 0..max_iters {
            let mut next = dense_matvec(&a, &v);
            let nn = l2(&next);
            if nn == 0.0 {
                break;
            }
            next.iter_mut().for_each(|x| *x /= nn);
            if inner(&next, &v) < 0.0 {
                next.iter_mut().for_each(|x| *x = -*x);
            }
            let moved = l2(&sub(&next, &v));
            v = next;
            if moved < 1e-15 {
                break;
            }
        }
        let av = dense_matvec(&a, &v);
        let lambda = inner(&v, &av);
        for i in 0..n {
            for j in 0..n {
                a[i][j] -= lambda * v[i] * v[j];
            }
        }
        pairs.push((lambda, v));
    }
    pairs
}

/// Largest principal angle (radians) between the spans of `a` and `b`,
/// each a list of orthonormal vectors of equal count, bounded above via the
/// Frobenius norm of the residual of projecting `a` onto `b`.
pub fn principal_angle_bound(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut frob = 0.0;
    for u in a {
        let mut r = u.clone();
        for v in b {
            let c = inner(u, v);
            for (ri, vi) in r.iter_mut().zip(v) {
                *ri -= c * vi;
            }
        }
        frob += inner(&r, &r);
    }
    frob.sqrt().min(1.0).asin()
}

/// Kolmogorov–Smirnov statistic of `samples` against Uniform(lo, hi).
pub fn ks_uniform(samples: &mut [f64], lo: f64, hi: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0_f64;
    for (i, x) in samples.iter().enumerate() {
        let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - cdf).max(cdf - i as f64 / n);
    }
    d
}

/// Gram–Schmidt orthonormalisation of the columns of a random matrix.
pub fn random_orthonormal_columns(rng: &mut TestRng, rows: usize, cols: usize) -> Matrix {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while columns.len() < cols {
        let mut v = rng.vec_normal(rows);
        for _ in 0..2 {
            for u in &columns {
                let c = inner(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
        }
        let nv = l2(&v);
        if nv < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        columns.push(v);
    }
    let mut data = vec![0.0; rows * cols];
    for (j, c) in columns.iter().enumerate() {
        for i in 0..rows {
            data[i * cols + j] = c[i];
        }
    }
    Matrix::new(rows, cols, data).unwrap()
}
