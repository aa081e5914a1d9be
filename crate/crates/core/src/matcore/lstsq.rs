use super::{Matrix, Vector};
use crate::error::{Error, Result};

/// Relative pivot threshold below which `A` is treated as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solve of `A x ≈ b` by Householder QR with column pivoting.
///
/// Fails with [`Error::RankDeficient`] when a pivot of `R` falls below
/// `1e-10` times the largest one (or when `A` has more columns than rows).
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<Vector> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::invalid_argument(format!(
            "lstsq: matrix has {m} rows but right-hand side has {} entries",
            b.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid_argument("lstsq: matrix has no columns"));
    }
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{m}x{n} system cannot have full column rank"
        )));
    }

    let mut r = a.as_slice().to_vec();
    let mut y = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut largest_pivot = 0.0_f64;
    let mut v = vec![0.0; m];

    for j in 0..n {
        // Pivot on the remaining column with the largest trailing norm.
        let (best, best_norm) = (j..n)
            .map(|c| (c, (j..m).map(|i| r[i * n + c] * r[i * n + c]).sum::<f64>()))
            .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best != j {
            for i in 0..m {
                r.swap(i * n + j, i * n + best);
            }
            perm.swap(j, best);
        }
        let col_norm = best_norm.sqrt();
        if j == 0 {
            largest_pivot = col_norm;
        }
        if col_norm == 0.0 || col_norm < RANK_TOL * largest_pivot {
            return Err(Error::RankDeficient(format!(
                "pivot {j} is {col_norm:e}, largest is {largest_pivot:e}"
            )));
        }

        let x0 = r[j * n + j];
        let alpha = if x0 >= 0.0 { -col_norm } else { col_norm };
        for i in j..m {
            v[i] = r[i * n + j];
        }
        v[j] -= alpha;
        let vtv: f64 = v[j..m].iter().map(|x| x * x).sum();

        r[j * n + j] = alpha;
        for i in (j + 1)..m {
            r[i * n + j] = 0.0;
        }
        if vtv == 0.0 {
            continue;
        }
        let scale = 2.0 / vtv;
        for c in (j + 1)..n {
            let proj: f64 = (j..m).map(|i| v[i] * r[i * n + c]).sum();
            let f = scale * proj;
            for i in j..m {
                r[i * n + c] -= f * v[i];
            }
        }
        let proj: f64 = (j..m).map(|i| v[i] * y[i]).sum();
        let f = scale * proj;
        for i in j..m {
            y[i] -= f * v[i];
        }
    }

    // Back substitution on the leading n×n block of R.
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = y[i];
        for c in (i + 1)..n {
            acc -= r[i * n + c] * z[c];
        }
        z[i] = acc / r[i * n + i];
    }
    let mut x = vec![0.0; n];
    for (pos, &col) in perm.iter().enumerate() {
        x[col] = z[pos];
    }
    Vector::new(x)
}
