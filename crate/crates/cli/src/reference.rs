//! Built-in reference values and inequalities, compiled in from `data/`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use bellforge_core::detection::Lifting;
use bellforge_core::facetgen::BellInequality;
use bellforge_core::rational::{self, Rational};
use bellforge_core::scenario::Scenario;
use serde::Deserialize;

use crate::error::Failure;

const REFERENCE: &str = include_str!("../data/reference.toml");

const BUILTIN: &[(&str, &str)] = &[
    ("chsh", include_str!("../data/inequalities/chsh.toml")),
    ("i3322", include_str!("../data/inequalities/i3322.toml")),
    ("i4422", include_str!("../data/inequalities/i4422.toml")),
    ("i3522", include_str!("../data/inequalities/i3522.toml")),
];

#[derive(Debug, Clone, Deserialize)]
pub struct SolvedEntry {
    pub scenario: [usize; 4],
    pub classes: usize,
    pub facets: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OrbitTable {
    pub scenario: [usize; 4],
    pub total: u64,
    pub histogram: Vec<[u64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BoundCell {
    /// `(mA, mB)`.
    pub cell: [usize; 2],
    pub value: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ThresholdRef {
    pub name: String,
    /// Best efficiency at relaxation levels 1, 2, 3.
    pub levels: Vec<f64>,
    pub analytic: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Reference {
    pub solved: Vec<SolvedEntry>,
    pub orbits_4422: OrbitTable,
    pub bounds: Vec<BoundCell>,
    pub thresholds: Vec<ThresholdRef>,
}

fn scenario_of(v: [usize; 4]) -> Scenario {
    Scenario::new(v[0], v[1], v[2], v[3]).expect("reference scenarios are valid")
}

/// Parsed once; the file is part of the binary.
pub fn reference() -> &'static Reference {
    static CELL: OnceLock<Reference> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(REFERENCE).expect("built-in reference table parses"))
}

/// Class count and facet total when the full facet list is known.
pub fn solved(s: Scenario) -> Option<(usize, u64)> {
    if let Some(e) = reference().solved.iter().find(|e| scenario_of(e.scenario) == s) {
        return Some((e.classes, e.facets));
    }
    // Two binary measurements on Alice's side and anything on Bob's: only
    // positivity (4km) and CHSH on a pair of Bob's settings, each of which
    // has its outcomes split into two nonempty groups (8 per choice).
    if s.ma == 2 && s.ka == 2 && s.mb >= 2 && s.kb >= 2 {
        let (m, k) = (s.mb as u64, s.kb as u64);
        let splits = (1u64 << (k - 1)) - 1;
        return Some((2, 4 * m * (m - 1) * splits * splits + 4 * k * m));
    }
    None
}

/// Orbit-size histogram for scenarios where it is known.
pub fn orbit_histogram(s: Scenario) -> Option<(BTreeMap<u64, usize>, u64)> {
    let t = &reference().orbits_4422;
    (scenario_of(t.scenario) == s).then(|| (t.histogram.iter().map(|[o, c]| (*o, *c as usize)).collect(), t.total))
}

/// Known detection bound of the binary `(mA, mB)` scenario.
pub fn bound(ma: usize, mb: usize) -> Option<Rational> {
    let (hi, lo) = if ma >= mb { (ma, mb) } else { (mb, ma) };
    reference()
        .bounds
        .iter()
        .find(|c| c.cell == [hi, lo])
        .map(|c| rational::parse(&c.value).expect("reference bound parses"))
}

pub fn threshold(name: &str) -> Option<&'static ThresholdRef> {
    reference().thresholds.iter().find(|t| t.name == name)
}

#[derive(Debug, Clone, Deserialize)]
struct LiftingEntry {
    alice: Vec<usize>,
    bob: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
struct InequalityFile {
    name: String,
    scenario: [usize; 4],
    bound: String,
    matrix: String,
    #[serde(default)]
    liftings: Vec<LiftingEntry>,
}

/// An inequality with its name and any recommended liftings.
#[derive(Debug, Clone)]
pub struct NamedInequality {
    pub name: String,
    pub inequality: BellInequality,
    pub liftings: Vec<Lifting>,
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// Parses an inequality file: `name`, `scenario = [mA, mB, kA, kB]`,
/// `bound`, a `matrix` string with Alice's `(x, a)` rows and Bob's `(y, b)`
/// columns, and optional `[[liftings]]` with `alice`/`bob` target outcomes.
pub fn parse_inequality(text: &str) -> Result<NamedInequality, Failure> {
    let f: InequalityFile = toml::from_str(text).map_err(|e| Failure::config(format!("inequality file: {e}")))?;
    let s = Scenario::new(f.scenario[0], f.scenario[1], f.scenario[2], f.scenario[3])
        .map_err(|e| Failure::config(e.to_string()))?;
    let bound = rational::parse(&f.bound).map_err(|e| Failure::config(e.to_string()))?;
    let inequality =
        BellInequality::parse_matrix(s, &f.matrix, bound).map_err(|e| Failure::config(format!("{}: {e}", f.name)))?;
    let liftings: Vec<Lifting> =
        f.liftings.into_iter().map(|l| Lifting { target_a: l.alice, target_b: l.bob }).collect();
    if let Some(bad) = liftings.iter().find(|l| !l.fits(s)) {
        return Err(Failure::config(format!("lifting {bad:?} does not fit {s}")));
    }
    Ok(NamedInequality { name: f.name, inequality, liftings })
}

/// A built-in name (`chsh`, `i3322`, `i4422`, `i3522`) or a file path.
pub fn load_inequality(spec: &str) -> Result<NamedInequality, Failure> {
    if let Some((_, text)) = BUILTIN.iter().find(|(n, _)| n.eq_ignore_ascii_case(spec)) {
        return parse_inequality(text);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::config(format!(
            "{spec}: {e} (built-in inequalities: {})",
            builtin_names().join(", ")
        ))
    })?;
    parse_inequality(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parses() {
        let r = reference();
        assert_eq!(r.solved.len(), 6);
        assert_eq!(bound(3, 4), Some(rational::ratio(5, 9)));
        assert_eq!(bound(5, 5), Some(rational::ratio(4, 9)));
        assert_eq!(solved(Scenario::binary(3, 4)), Some((6, 12480)));
    }

    #[test]
    fn histogram_sums_to_total() {
        let (h, total) = orbit_histogram(Scenario::binary(4, 4)).unwrap();
        assert_eq!(h.values().sum::<usize>(), 175);
        assert_eq!(h.iter().map(|(o, c)| o * *c as u64).sum::<u64>(), total);
    }

    #[test]
    fn family_formula_agrees_with_table() {
        assert_eq!(solved(Scenario::binary(2, 2)), Some((2, 24)));
        let s = Scenario::new(2, 2, 3, 3).unwrap();
        assert_eq!(solved(s), Some((3, 1116)));
        // Values from an independent vertex-to-facet conversion.
        for (mb, kb, facets) in [(3, 2, 48), (4, 2, 80), (5, 2, 120), (2, 3, 96), (3, 3, 252), (4, 3, 480), (2, 4, 424)] {
            assert_eq!(solved(Scenario::new(2, mb, 2, kb).unwrap()), Some((2, facets)), "(2,{mb},2,{kb})");
        }
    }

    #[test]
    fn builtins_load() {
        for name in builtin_names() {
            let ni = load_inequality(name).unwrap();
            assert_eq!(ni.name, name);
        }
        assert_eq!(load_inequality("i4422").unwrap().liftings.len(), 2);
        assert!(load_inequality("/no/such/file").is_err());
    }
}
