//! Exhaustive facet enumeration for tiny scenarios.
//!
//! Every `t`-subset of vertices whose homogenised coordinates have rank `t`
//! spans a hyperplane; it is a facet iff every other vertex lies strictly on
//! one side or on the hyperplane itself. Signatures are deduplicated, so a
//! facet tight on more than `t` vertices is reported once.

use std::collections::BTreeSet;

use super::{affine_fix, AffineSignature};
use crate::linalg;
use crate::rational::{self, Rational};
use crate::scenario::{enumerate_deterministic, vertex_affine_coordinates, Scenario};

pub const MAX_VERTICES: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BruteforceError {
    #[error("scenario {scenario} too large for exhaustive enumeration ({vertices} vertices, dimension {dimension})")]
    TooLarge { scenario: Scenario, vertices: usize, dimension: usize },
}

/// All facet signatures of the local polytope, sorted.
pub fn bruteforce_facets(s: Scenario, max_dim: usize) -> Result<Vec<AffineSignature>, BruteforceError> {
    let n = s.num_vertices();
    let t = s.dimension();
    if n > MAX_VERTICES || t > max_dim {
        return Err(BruteforceError::TooLarge { scenario: s, vertices: n, dimension: t });
    }
    let coords: Vec<Vec<i64>> = enumerate_deterministic(s).iter().map(vertex_affine_coordinates).collect();
    let coords_q: Vec<Vec<Rational>> = coords
        .iter()
        .map(|r| r.iter().map(|&v| rational::int(v)).collect())
        .collect();
    let mut seen: BTreeSet<Vec<Rational>> = BTreeSet::new();
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..t).collect();
    loop {
        let rows: Vec<Vec<i64>> = subset.iter().map(|&i| coords[i].clone()).collect();
        if linalg::rank_integer(&rows) == t {
            let rows_q: Vec<Vec<Rational>> = subset.iter().map(|&i| coords_q[i].clone()).collect();
            let kernel = linalg::kernel(&rows_q, t + 1);
            debug_assert_eq!(kernel.len(), 1);
            let normal = &kernel[0];
            let side: Vec<Rational> = coords_q
                .iter()
                .map(|c| c.iter().zip(normal).map(|(a, b)| a * b).sum())
                .collect();
            let positive = side.iter().any(|v| *v > 0u32);
            let negative = side.iter().any(|v| *v < 0u32);
            if positive != negative {
                let oriented: Vec<Rational> =
                    if negative { side.iter().map(|v| -v.clone()).collect() } else { side };
                let sig = affine_fix(&oriented).expect("one-sided hyperplane has two values");
                if seen.insert(sig.values.clone()) {
                    out.push(sig);
                }
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    out.sort_by(|a, b| a.values.cmp(&b.values));
    Ok(out)
}

/// Advances to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_measurement_has_only_positivity() {
        let facets = bruteforce_facets(Scenario::binary(1, 1), 10).unwrap();
        assert_eq!(facets.len(), 4);
        assert!(facets.iter().all(|f| f.tally.len() == 2 && f.tally[&rational::int(1)] == 3));
    }

    #[test]
    fn size_gate() {
        assert!(matches!(
            bruteforce_facets(Scenario::binary(3, 3), 10),
            Err(BruteforceError::TooLarge { .. })
        ));
    }

    #[test]
    fn combinations_are_exhaustive() {
        let mut c = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut c, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }
}
