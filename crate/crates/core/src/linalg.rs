//! Exact rank and kernel computations.
//!
//! Integer matrices go through fraction-free (Bareiss) elimination, first in
//! `i128` with checked arithmetic and, if an intermediate overflows, again
//! over arbitrary-precision integers. Rational matrices use plain Gaussian
//! elimination over `Rational`.

use malachite_base::num::basic::traits::Zero;
use malachite_nz::integer::Integer;

use crate::rational::Rational;

/// Rank of an integer matrix given as rows.
pub fn rank_integer(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let wide: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| i128::from(v)).collect())
        .collect();
    match bareiss_i128(wide) {
        Some(r) => r,
        None => bareiss_big(rows),
    }
}

fn bareiss_i128(mut m: Vec<Vec<i128>>) -> Option<usize> {
    let nrows = m.len();
    let ncols = m[0].len();
    let mut rank = 0;
    let mut prev: i128 = 1;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col];
        for r in rank + 1..nrows {
            let factor = m[r][col];
            for c in col + 1..ncols {
                let lhs = m[r][c].checked_mul(pivot)?;
                let rhs = factor.checked_mul(m[rank][c])?;
                m[r][c] = lhs.checked_sub(rhs)? / prev;
            }
            m[r][col] = 0;
        }
        prev = pivot;
        rank += 1;
    }
    Some(rank)
}

fn bareiss_big(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<Integer>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| Integer::from(v)).collect())
        .collect();
    let nrows = m.len();
    let ncols = m[0].len();
    let mut rank = 0;
    let mut prev = Integer::from(1);
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(p) = (rank..nrows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let pivot = m[rank][col].clone();
        for r in rank + 1..nrows {
            let factor = m[r][col].clone();
            for c in col + 1..ncols {
                let v = (&m[r][c] * &pivot - &factor * &m[rank][c]) / &prev;
                m[r][c] = v;
            }
            m[r][col] = Integer::ZERO;
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut [Vec<Rational>]) -> Vec<usize> {
    let nrows = m.len();
    if nrows == 0 {
        return Vec::new();
    }
    let ncols = m[0].len();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        let Some(p) = (row..nrows).find(|&r| m[r][col] != 0u32) else {
            continue;
        };
        m.swap(row, p);
        let inv = Rational::from(1u32) / &m[row][col];
        for c in col..ncols {
            if m[row][c] != 0u32 {
                m[row][c] *= &inv;
            }
        }
        for r in 0..nrows {
            if r == row || m[r][col] == 0u32 {
                continue;
            }
            let factor = m[r][col].clone();
            for c in col..ncols {
                if m[row][c] != 0u32 {
                    let delta = &factor * &m[row][c];
                    m[r][c] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Rank of a rational matrix.
pub fn rank_rational(rows: &[Vec<Rational>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Basis of the right kernel `{z : M z = 0}`.
pub fn kernel(rows: &[Vec<Rational>], ncols: usize) -> Vec<Vec<Rational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut z = vec![Rational::ZERO; ncols];
        z[free] = Rational::from(1u32);
        for (r, &pc) in pivots.iter().enumerate() {
            z[pc] = -m[r][free].clone();
        }
        basis.push(z);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    #[test]
    fn integer_rank_small() {
        let m = vec![vec![1, 2, 3], vec![2, 4, 6], vec![1, 0, 1]];
        assert_eq!(rank_integer(&m), 2);
        assert_eq!(rank_integer(&[vec![0, 0], vec![0, 0]]), 0);
    }

    #[test]
    fn big_fallback_agrees() {
        let m: Vec<Vec<i64>> = (0..6)
            .map(|i| (0..6).map(|j| ((i + 1) * (j + 3) % 7) as i64 + if i == j { 1 } else { 0 }).collect())
            .collect();
        assert_eq!(bareiss_big(&m), bareiss_i128(m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect()).unwrap());
    }

    #[test]
    fn huge_entries_use_big_path() {
        let big = i64::MAX / 3;
        let m = vec![vec![big, big - 1, 7], vec![big - 5, big, 3], vec![1, 2, big]];
        assert_eq!(rank_integer(&m), 3);
    }

    #[test]
    fn kernel_of_rank_one() {
        let m = vec![vec![int(1), int(1), int(1)]];
        let k = kernel(&m, 3);
        assert_eq!(k.len(), 2);
        for z in &k {
            let s: Rational = z.iter().cloned().sum();
            assert_eq!(s, int(0));
        }
    }
}
