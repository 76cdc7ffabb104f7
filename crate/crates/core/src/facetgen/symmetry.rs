//! Relabelling action on vertex-value vectors.
//!
//! A vertex index is `alice·n_B + bob`, so a value vector is an
//! `n_A × n_B` matrix. Every relabelling acts as an independent row
//! permutation (Alice's part), column permutation (Bob's part) and, for
//! square scenarios, an optional transpose. Equivalence and stabilizer
//! queries exploit that factorisation: for a fixed Alice element the column
//! multiset is hashed once and Bob elements are matched against it, so the
//! full group is never materialised.

use std::collections::HashMap;

use crate::rational::Rational;
use crate::scenario::{party_relabellings, Relabelling, Scenario};

type PartyElement = (Vec<usize>, Vec<Vec<usize>>);

#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    pub scenario: Scenario,
    alice_elems: Vec<PartyElement>,
    bob_elems: Vec<PartyElement>,
    /// Index permutations induced on Alice's (resp. Bob's) assignments.
    alice: Vec<Vec<u32>>,
    bob: Vec<Vec<u32>>,
    swap: bool,
}

fn assignment_action(m: usize, k: usize, meas: &[usize], out: &[Vec<usize>]) -> Vec<u32> {
    let n = k.pow(m as u32);
    let mut image = vec![0u32; n];
    let mut digits = vec![0usize; m];
    let mut renamed = vec![0usize; m];
    for (idx, slot) in image.iter_mut().enumerate() {
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = rest % k;
            rest /= k;
        }
        for x in 0..m {
            renamed[meas[x]] = out[x][digits[x]];
        }
        *slot = renamed.iter().fold(0, |acc, &v| acc * k + v) as u32;
    }
    image
}

/// Witness of an equivalence: Alice element, Bob element and whether the
/// parties are swapped afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupElement {
    pub alice: usize,
    pub bob: usize,
    pub swap: bool,
}

impl SymmetryGroup {
    pub fn new(s: Scenario) -> Self {
        let alice_elems = party_relabellings(s.ma, s.ka);
        let bob_elems = party_relabellings(s.mb, s.kb);
        let alice = alice_elems.iter().map(|(m, o)| assignment_action(s.ma, s.ka, m, o)).collect();
        let bob = bob_elems.iter().map(|(m, o)| assignment_action(s.mb, s.kb, m, o)).collect();
        SymmetryGroup { scenario: s, alice_elems, bob_elems, alice, bob, swap: s.is_square() }
    }

    pub fn order(&self) -> u128 {
        let base = self.alice.len() as u128 * self.bob.len() as u128;
        if self.swap {
            2 * base
        } else {
            base
        }
    }

    pub fn relabelling(&self, g: GroupElement) -> Relabelling {
        let (ma, oa) = &self.alice_elems[g.alice];
        let (mb, ob) = &self.bob_elems[g.bob];
        Relabelling {
            scenario: self.scenario,
            party_swap: g.swap,
            meas_perm_a: ma.clone(),
            meas_perm_b: mb.clone(),
            out_perm_a: oa.clone(),
            out_perm_b: ob.clone(),
        }
    }

    /// Vertex permutation of a group element (source index → target index).
    pub fn vertex_permutation(&self, g: GroupElement) -> Vec<usize> {
        let nb = self.bob[0].len();
        let na = self.alice[0].len();
        let pa = &self.alice[g.alice];
        let pb = &self.bob[g.bob];
        let mut out = Vec::with_capacity(na * nb);
        for i in 0..na {
            for j in 0..nb {
                let (ni, nj) = (pa[i] as usize, pb[j] as usize);
                out.push(if g.swap { nj * nb + ni } else { ni * nb + nj });
            }
        }
        out
    }

    /// Some `g` with `g·from = to`, if one exists.
    pub fn find_equivalence(&self, from: &[Rational], to: &[Rational]) -> Option<GroupElement> {
        let (a, b) = encode_pair(from, to)?;
        let mut found = None;
        self.scan(&a, &b, false, &mut |ga, gb| {
            found = Some(GroupElement { alice: ga, bob: gb, swap: false });
            true
        });
        if found.is_none() && self.swap {
            let bt = self.transpose(&b);
            self.scan(&a, &bt, false, &mut |ga, gb| {
                found = Some(GroupElement { alice: ga, bob: gb, swap: true });
                true
            });
        }
        found
    }

    pub fn equivalent(&self, a: &[Rational], b: &[Rational]) -> bool {
        self.find_equivalence(a, b).is_some()
    }

    /// Number of group elements fixing `values`.
    pub fn stabilizer_order(&self, values: &[Rational]) -> u128 {
        let (a, _) = encode_pair(values, values).expect("same vector");
        let mut count: u128 = 0;
        self.scan(&a, &a, true, &mut |_, _| {
            count += 1;
            false
        });
        if self.swap {
            let at = self.transpose(&a);
            self.scan(&a, &at, true, &mut |_, _| {
                count += 1;
                false
            });
        }
        count
    }

    /// Number of distinct images of `values` under the group.
    pub fn orbit_size(&self, values: &[Rational]) -> u128 {
        self.order() / self.stabilizer_order(values)
    }

    fn transpose(&self, m: &[u32]) -> Vec<u32> {
        let n = self.alice[0].len();
        debug_assert_eq!(n, self.bob[0].len());
        let mut t = vec![0; m.len()];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = m[i * n + j];
            }
        }
        t
    }

    /// Calls `hit(alice, bob)` for every pair with `(alice, bob)·from = to`,
    /// stopping early when `hit` returns `true`.
    fn scan(&self, from: &[u32], to: &[u32], _all: bool, hit: &mut dyn FnMut(usize, usize) -> bool) {
        let na = self.alice[0].len();
        let nb = self.bob[0].len();
        // Column ids of `from`.
        let mut ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut from_cols = vec![0u32; nb];
        let mut col = vec![0u32; na];
        for (j, slot) in from_cols.iter_mut().enumerate() {
            for i in 0..na {
                col[i] = from[i * nb + j];
            }
            let next = ids.len() as u32;
            *slot = *ids.entry(col.clone()).or_insert(next);
        }
        let mut from_hist = vec![0u32; ids.len()];
        for &c in &from_cols {
            from_hist[c as usize] += 1;
        }
        let mut to_cols = vec![0u32; nb];
        let mut hist = vec![0u32; ids.len()];
        // g·from = to  ⇔  to[pa(i)][pb(j)] = from[i][j]  ⇔  column pb(j) of
        // `to` with rows pulled back through pa equals column j of `from`.
        'alice: for (ga, pa) in self.alice.iter().enumerate() {
            hist.iter_mut().for_each(|h| *h = 0);
            for (j, slot) in to_cols.iter_mut().enumerate() {
                for i in 0..na {
                    col[i] = to[pa[i] as usize * nb + j];
                }
                match ids.get(&col) {
                    Some(&id) => {
                        *slot = id;
                        hist[id as usize] += 1;
                    }
                    None => continue 'alice,
                }
            }
            if hist != from_hist {
                continue;
            }
            for (gb, pb) in self.bob.iter().enumerate() {
                if (0..nb).all(|j| to_cols[pb[j] as usize] == from_cols[j]) && hit(ga, gb) {
                    return;
                }
            }
        }
    }
}

/// Encodes two vectors over a shared value alphabet; `None` if their value
/// multisets differ (they cannot be permutations of each other).
fn encode_pair(a: &[Rational], b: &[Rational]) -> Option<(Vec<u32>, Vec<u32>)> {
    if a.len() != b.len() {
        return None;
    }
    let mut codes: HashMap<&Rational, u32> = HashMap::new();
    let mut ea = Vec::with_capacity(a.len());
    for v in a {
        let next = codes.len() as u32;
        ea.push(*codes.entry(v).or_insert(next));
    }
    let mut eb = Vec::with_capacity(b.len());
    for v in b {
        eb.push(*codes.get(v)?);
    }
    let mut ha = ea.clone();
    let mut hb = eb.clone();
    ha.sort_unstable();
    hb.sort_unstable();
    (ha == hb).then_some((ea, eb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facetgen::{signature_of, values_at_vertices, BellInequality};
    use crate::rational::int;
    use crate::scenario::{relabelling_group, Relabel};

    #[test]
    fn orders_match_formula() {
        for s in [Scenario::binary(2, 2), Scenario::binary(3, 4), Scenario::new(2, 2, 3, 3).unwrap()] {
            assert_eq!(SymmetryGroup::new(s).order(), s.relabelling_group_order());
        }
    }

    #[test]
    fn vertex_permutations_match_relabellings() {
        let s = Scenario::new(2, 2, 2, 3).unwrap();
        let g = SymmetryGroup::new(s);
        for (ia, ib) in [(0, 0), (3, 7), (5, 11)] {
            let e = GroupElement { alice: ia, bob: ib, swap: false };
            assert_eq!(g.vertex_permutation(e), g.relabelling(e).vertex_map());
        }
        let s = Scenario::binary(2, 2);
        let g = SymmetryGroup::new(s);
        let e = GroupElement { alice: 3, bob: 5, swap: true };
        assert_eq!(g.vertex_permutation(e), g.relabelling(e).vertex_map());
    }

    #[test]
    fn chsh_orbit_is_eight() {
        let b = crate::facetgen::tests::chsh();
        let g = SymmetryGroup::new(b.scenario);
        assert_eq!(g.orbit_size(&signature_of(&b).unwrap().values), 8);
    }

    #[test]
    fn positivity_orbit_is_sixteen() {
        let s = Scenario::binary(2, 2);
        let b = BellInequality::positivity(s, 0, 0, 0, 0);
        let g = SymmetryGroup::new(s);
        assert_eq!(g.orbit_size(&values_at_vertices(&b)), 16);
    }

    #[test]
    fn relabelled_inequalities_are_equivalent() {
        let b = crate::facetgen::tests::chsh();
        let g = SymmetryGroup::new(b.scenario);
        let sig = signature_of(&b).unwrap().values;
        for r in relabelling_group(b.scenario).iter().step_by(11) {
            let other = signature_of(&b.relabel(r).unwrap()).unwrap().values;
            let w = g.find_equivalence(&sig, &other).expect("same class");
            let moved = signature_of(&b).unwrap().permuted(&g.vertex_permutation(w)).values;
            assert_eq!(moved, other);
        }
        let pos = values_at_vertices(&BellInequality::positivity(b.scenario, 0, 0, 0, 0));
        assert!(!g.equivalent(&sig, &pos));
        assert!(!g.equivalent(&sig, &vec![int(1); 16]));
    }
}
