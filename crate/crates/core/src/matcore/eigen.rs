use rayon::prelude::*;

use super::Matrix;
use super::Vector;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const CONVERGENCE: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues closer than this keep the order the sweeps left them in.
pub(crate) const TIE_TOL: f64 = 1e-10;
const SIGN_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigh {
    pub values: Vector,
    pub vectors: Matrix,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Each sweep visits every off-diagonal pair once, in a round-robin
/// schedule of rounds made of disjoint pairs. The rotations of a round are
/// applied to rows first, then to columns, so each matrix entry is updated
/// in a fixed order regardless of how rows are spread across threads.
/// Sweeps stop once the off-diagonal Frobenius norm drops to
/// `1e-12 · ‖S‖F` (at most 100 sweeps).
///
/// Output conventions:
/// - eigenvalues descending; a run of eigenvalues within `1e-10` of each
///   other keeps the diagonal position order the sweeps produced,
/// - each eigenvector's first component with magnitude above `1e-12` is
///   positive.
///
/// Identical inputs give identical bits.
pub fn eigh_descending(s: &Matrix) -> Result<Eigh> {
    let (rows, cols) = s.shape();
    if rows != cols {
        return Err(Error::invalid_input(format!(
            "eigh needs a square matrix, got {rows}x{cols}"
        )));
    }
    let n = rows;
    if n == 0 {
        return Err(Error::invalid_input("eigh needs a non-empty matrix"));
    }
    let scale = s.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (s.get(i, j) - s.get(j, i)).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid_input(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    // Work on an exactly symmetric copy taken from the upper triangle.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            a[i * n + j] = s.get(i, j);
            a[j * n + i] = s.get(i, j);
        }
    }
    // Rows of `vt` are eigenvectors, so rotations touch contiguous memory.
    let mut vt = Matrix::identity(n).into_vec();
    let schedule = round_robin(n);

    let target = CONVERGENCE * s.frobenius_norm();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a, n) <= target {
            converged = true;
            break;
        }
        for round in &schedule {
            apply_round(&mut a, &mut vt, n, round);
        }
        symmetrize(&mut a, n);
    }
    if !converged && off_diagonal_norm(&a, n) > target {
        return Err(Error::invalid_input(format!(
            "jacobi sweeps did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let order = descending_order(&diag);

    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        values.push(diag[src]);
        let v = &vt[src * n..(src + 1) * n];
        let flip = v
            .iter()
            .find(|x| x.abs() > SIGN_TOL)
            .is_some_and(|x| *x < 0.0);
        for (row, x) in v.iter().enumerate() {
            vectors[row * n + col] = if flip { -x } else { *x };
        }
    }
    Ok(Eigh {
        values: Vector::new(values)?,
        vectors: Matrix::new(n, n, vectors)?,
    })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += a[i * n + j] * a[i * n + j];
        }
    }
    (2.0 * acc).sqrt()
}

/// Circle-method tournament: `n - 1` rounds (`n` for odd `n`) of disjoint
/// pairs `(p, q)` with `p < q`, covering every pair exactly once.
fn round_robin(n: usize) -> Vec<Vec<(usize, usize)>> {
    let m = n + n % 2;
    let mut seats: Vec<usize> = (0..m).collect();
    let mut rounds = Vec::with_capacity(m.saturating_sub(1));
    for _ in 0..m.saturating_sub(1) {
        let mut round: Vec<(usize, usize)> = (0..m / 2)
            .map(|i| (seats[i], seats[m - 1 - i]))
            .filter(|&(x, y)| x < n && y < n)
            .map(|(x, y)| (x.min(y), x.max(y)))
            .collect();
        round.sort_unstable();
        rounds.push(round);
        seats[1..].rotate_right(1);
    }
    rounds
}

#[derive(Clone, Copy)]
struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    t: f64,
    apq: f64,
}

/// Rows this large are worth handing to the thread pool.
const PARALLEL_MIN_DIM: usize = 128;

/// Applies the rotations annihilating `a[p][q]` for every pair of a round.
/// Pairs are disjoint, so each rotation's angle depends only on its own
/// 2×2 block, which the other rotations of the round leave untouched.
fn apply_round(a: &mut [f64], vt: &mut [f64], n: usize, round: &[(usize, usize)]) {
    let rotations: Vec<Rotation> = round
        .iter()
        .filter_map(|&(p, q)| {
            let apq = a[p * n + q];
            if apq == 0.0 {
                return None;
            }
            let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
            let c = 1.0 / t.hypot(1.0);
            Some(Rotation {
                p,
                q,
                c,
                s: t * c,
                t,
                apq,
            })
        })
        .collect();
    if rotations.is_empty() {
        return;
    }
    let diag: Vec<(f64, f64)> = rotations
        .iter()
        .map(|r| (a[r.p * n + r.p], a[r.q * n + r.q]))
        .collect();

    rotate_row_pairs(a, n, &rotations);
    rotate_row_pairs(vt, n, &rotations);
    let columns = |row: &mut [f64]| {
        for r in &rotations {
            let (xp, xq) = (row[r.p], row[r.q]);
            row[r.p] = r.c * xp - r.s * xq;
            row[r.q] = r.s * xp + r.c * xq;
        }
    };
    if n >= PARALLEL_MIN_DIM {
        a.par_chunks_mut(n).for_each(columns);
    } else {
        a.chunks_mut(n).for_each(columns);
    }

    for (r, (app, aqq)) in rotations.iter().zip(diag) {
        a[r.p * n + r.p] = app - r.t * r.apq;
        a[r.q * n + r.q] = aqq + r.t * r.apq;
        a[r.p * n + r.q] = 0.0;
        a[r.q * n + r.p] = 0.0;
    }
}

/// `row_p ← c·row_p − s·row_q`, `row_q ← s·row_p + c·row_q` for each rotation.
fn rotate_row_pairs(m: &mut [f64], n: usize, rotations: &[Rotation]) {
    let mut rows: Vec<Option<&mut [f64]>> = m.chunks_mut(n).map(Some).collect();
    let mut work: Vec<(&mut [f64], &mut [f64], f64, f64)> = rotations
        .iter()
        .map(|r| {
            let rp = rows[r.p].take().expect("pairs in a round are disjoint");
            let rq = rows[r.q].take().expect("pairs in a round are disjoint");
            (rp, rq, r.c, r.s)
        })
        .collect();
    let rotate = |(rp, rq, c, s): &mut (&mut [f64], &mut [f64], f64, f64)| {
        for (xp, xq) in rp.iter_mut().zip(rq.iter_mut()) {
            let (op, oq) = (*xp, *xq);
            *xp = *c * op - *s * oq;
            *xq = *s * op + *c * oq;
        }
    };
    if n >= PARALLEL_MIN_DIM {
        work.par_iter_mut().for_each(rotate);
    } else {
        work.iter_mut().for_each(rotate);
    }
}

/// Copies the upper triangle onto the lower one; row and column stages
/// round differently, so the two halves drift apart by a few ulps.
fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            a[j * n + i] = a[i * n + j];
        }
    }
}

/// Indices of `diag` sorted by descending value; clusters of values within
/// `TIE_TOL` of their neighbour are re-sorted by original position.
fn descending_order(diag: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diag[order[end - 1]] - diag[order[end]] <= TIE_TOL {
            end += 1;
        }
        order[start..end].sort_unstable();
        start = end;
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn round_robin_covers_each_pair_once() {
        for n in 1..12 {
            let mut seen = std::collections::BTreeSet::new();
            for round in round_robin(n) {
                let mut used = vec![false; n];
                for (p, q) in round {
                    assert!(p < q && q < n);
                    assert!(!used[p] && !used[q]);
                    used[p] = true;
                    used[q] = true;
                    assert!(seen.insert((p, q)));
                }
            }
            assert_eq!(seen.len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn diagonal_input_gives_standard_basis() {
        let s = Matrix::diag(&[9.0, 4.0, 1.0]).unwrap();
        let e = eigh_descending(&s).unwrap();
        assert_eq!(e.values.as_slice(), &[9.0, 4.0, 1.0]);
        assert_eq!(e.vectors, Matrix::identity(3));
    }

    #[test]
    fn unsorted_diagonal_is_reordered() {
        let s = Matrix::diag(&[1.0, 9.0, 4.0]).unwrap();
        let e = eigh_descending(&s).unwrap();
        assert_eq!(e.values.as_slice(), &[9.0, 4.0, 1.0]);
        assert_eq!(e.vectors.column(0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(e.vectors.column(2).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_by_two_symmetric() {
        let s = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eigh_descending(&s).unwrap();
        assert_close(e.values[0], 3.0, 1e-14);
        assert_close(e.values[1], 1.0, 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(e.vectors.get(0, 0), r, 1e-14);
        assert_close(e.vectors.get(1, 0), r, 1e-14);
        assert_close(e.vectors.get(0, 1), r, 1e-14);
        assert_close(e.vectors.get(1, 1), -r, 1e-14);
    }

    #[test]
    fn identity_keeps_solver_order() {
        let e = eigh_descending(&Matrix::identity(5)).unwrap();
        assert_eq!(e.vectors, Matrix::identity(5));
    }

    #[test]
    fn near_ties_follow_position_order() {
        assert_eq!(descending_order(&[1.0, 1.0 + 5e-11, 3.0]), vec![2, 0, 1]);
        assert_eq!(descending_order(&[1.0, 1.0 + 5e-10, 3.0]), vec![2, 1, 0]);
    }

    #[test]
    fn rejects_non_square_and_asymmetric() {
        assert!(matches!(
            eigh_descending(&Matrix::zeros(2, 3)),
            Err(Error::InvalidInput(_))
        ));
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]).unwrap();
        assert!(matches!(eigh_descending(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_matrix_is_fine() {
        let e = eigh_descending(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values.as_slice(), &[0.0, 0.0, 0.0]);
        assert_eq!(e.vectors, Matrix::identity(3));
    }
}
