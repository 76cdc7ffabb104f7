//! Class registry: one representative per relabelling class.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::symmetry::SymmetryGroup;
use super::{signature_of, AffineSignature, BellInequality, FacetError};
use crate::rational::{self, Rational};
use crate::scenario::Scenario;

/// How a candidate is compared against stored classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquivalenceMode {
    /// Equal tallies are treated as the same class (fast, may merge
    /// genuinely different classes).
    Tally,
    /// Equal tallies plus an explicit relabelling witness.
    Full,
}

impl std::str::FromStr for EquivalenceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tally" | "tally-only" | "tally_only" => Ok(EquivalenceMode::Tally),
            "full" => Ok(EquivalenceMode::Full),
            other => Err(format!("unknown mode {other:?} (expected tally or full)")),
        }
    }
}

/// Where a class representative came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Manual { note: String },
    Seed {
        seed: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        pair: Option<(usize, usize)>,
        #[serde(with = "crate::rational::serde_rational_opt", skip_serializing_if = "Option::is_none", default)]
        eta: Option<Rational>,
    },
    Quantum { seed: u64 },
    Imported { source: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyEntry {
    #[serde(with = "crate::rational::serde_rational")]
    pub value: Rational,
    pub count: usize,
}

fn tally_entries(t: &BTreeMap<Rational, usize>) -> Vec<TallyEntry> {
    t.iter().map(|(v, c)| TallyEntry { value: v.clone(), count: *c }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassRecord {
    pub id: usize,
    pub representative: BellInequality,
    pub tally: Vec<TallyEntry>,
    /// FNV-1a of the affine-fixed vertex values, hex.
    pub signature_hash: String,
    pub orbit_size: Option<u64>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub signature: Option<AffineSignature>,
}

impl ClassRecord {
    pub fn signature(&self) -> Result<AffineSignature, FacetError> {
        match &self.signature {
            Some(s) => Ok(s.clone()),
            None => signature_of(&self.representative),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    New(usize),
    Known(usize),
}

impl Classification {
    pub fn id(&self) -> usize {
        match *self {
            Classification::New(i) | Classification::Known(i) => i,
        }
    }

    pub fn is_new(&self) -> bool {
        matches!(self, Classification::New(_))
    }
}

/// On-disk form of a registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistryFile {
    pub scenario: Scenario,
    pub mode: EquivalenceMode,
    #[serde(default)]
    pub config: serde_json::Value,
    /// FNV-1a over the serialized class list, hex.
    #[serde(default)]
    pub content_hash: String,
    pub classes: Vec<ClassRecord>,
}

impl RegistryFile {
    pub fn compute_content_hash(classes: &[ClassRecord]) -> String {
        let body = serde_json::to_string(classes).expect("records serialize");
        format!("{:016x}", rational::fnv1a64(body.as_bytes()))
    }
}

/// Exact signatures already seen, interned as small codes to keep memory
/// bounded.
#[derive(Default)]
struct SeenCache {
    alphabets: HashMap<Vec<Rational>, u32>,
    known: HashMap<(u32, Vec<u16>), usize>,
}

const SEEN_CAPACITY: usize = 400_000;

impl SeenCache {
    fn key(&mut self, sig: &AffineSignature, insert_alphabet: bool) -> Option<(u32, Vec<u16>)> {
        let alphabet: Vec<Rational> = sig.tally.keys().cloned().collect();
        if alphabet.len() > u16::MAX as usize {
            return None;
        }
        let id = match self.alphabets.get(&alphabet) {
            Some(&id) => id,
            None if insert_alphabet => {
                let id = self.alphabets.len() as u32;
                self.alphabets.insert(alphabet.clone(), id);
                id
            }
            None => return None,
        };
        let codes = sig
            .values
            .iter()
            .map(|v| alphabet.binary_search(v).expect("value in its own tally") as u16)
            .collect();
        Some((id, codes))
    }
}

/// Thread-safe set of inequality classes. Lookups take a read lock; inserts
/// re-check the records added since the lookup under the write lock, so
/// concurrent classification never stores two members of one class.
pub struct Registry {
    pub scenario: Scenario,
    pub mode: EquivalenceMode,
    group: Arc<SymmetryGroup>,
    records: RwLock<Vec<ClassRecord>>,
    seen: Mutex<SeenCache>,
}

impl Registry {
    pub fn new(scenario: Scenario, mode: EquivalenceMode) -> Self {
        Registry::with_group(Arc::new(SymmetryGroup::new(scenario)), mode)
    }

    pub fn with_group(group: Arc<SymmetryGroup>, mode: EquivalenceMode) -> Self {
        Registry {
            scenario: group.scenario,
            mode,
            group,
            records: RwLock::new(Vec::new()),
            seen: Mutex::new(SeenCache::default()),
        }
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.records.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<ClassRecord> {
        self.records.read().expect("registry lock").clone()
    }

    fn matches(&self, sig: &AffineSignature, rec: &ClassRecord) -> bool {
        let Some(stored) = rec.signature.as_ref() else { return false };
        if stored.tally != sig.tally {
            return false;
        }
        match self.mode {
            EquivalenceMode::Tally => true,
            EquivalenceMode::Full => self.group.equivalent(&sig.values, &stored.values),
        }
    }

    fn remember(&self, sig: &AffineSignature, id: usize) {
        let mut seen = self.seen.lock().expect("cache lock");
        if seen.known.len() >= SEEN_CAPACITY {
            return;
        }
        if let Some(key) = seen.key(sig, true) {
            seen.known.insert(key, id);
        }
    }

    /// Classifies a facet inequality (the caller has already run the facet
    /// test) and stores it if it starts a new class.
    pub fn classify(
        &self,
        b: &BellInequality,
        sig: &AffineSignature,
        provenance: Provenance,
    ) -> Classification {
        {
            let mut seen = self.seen.lock().expect("cache lock");
            if let Some(key) = seen.key(sig, false) {
                if let Some(&id) = seen.known.get(&key) {
                    return Classification::Known(id);
                }
            }
        }
        let checked = {
            let recs = self.records.read().expect("registry lock");
            if let Some(r) = recs.iter().find(|r| self.matches(sig, r)) {
                let id = r.id;
                drop(recs);
                self.remember(sig, id);
                return Classification::Known(id);
            }
            recs.len()
        };
        let orbit = self.group.orbit_size(&sig.values);
        let mut recs = self.records.write().expect("registry lock");
        if let Some(r) = recs[checked..].iter().find(|r| self.matches(sig, r)) {
            let id = r.id;
            drop(recs);
            self.remember(sig, id);
            return Classification::Known(id);
        }
        let id = recs.len();
        recs.push(ClassRecord {
            id,
            representative: b.clone(),
            tally: tally_entries(&sig.tally),
            signature_hash: format!("{:016x}", sig.hash64()),
            orbit_size: u64::try_from(orbit).ok(),
            provenance,
            signature: Some(sig.clone()),
        });
        drop(recs);
        self.remember(sig, id);
        Classification::New(id)
    }

    /// Computes the signature and classifies.
    pub fn classify_inequality(&self, b: &BellInequality, provenance: Provenance) -> Result<Classification, FacetError> {
        let sig = signature_of(b)?;
        Ok(self.classify(b, &sig, provenance))
    }

    /// Adds the positivity class (every generated search includes it).
    pub fn insert_positivity(&self) -> Classification {
        let b = BellInequality::positivity(self.scenario, 0, 0, 0, 0);
        let sig = signature_of(&b).expect("positivity has two vertex values");
        self.classify(&b, &sig, Provenance::Manual { note: "positivity".into() })
    }

    pub fn total_facets(&self) -> u128 {
        self.records
            .read()
            .expect("registry lock")
            .iter()
            .map(|r| u128::from(r.orbit_size.unwrap_or(0)))
            .sum()
    }

    /// Histogram orbit size → number of classes.
    pub fn orbit_histogram(&self) -> BTreeMap<u64, usize> {
        orbit_histogram(&self.records())
    }

    pub fn to_file(&self, config: serde_json::Value) -> RegistryFile {
        let classes = self.records();
        let content_hash = RegistryFile::compute_content_hash(&classes);
        RegistryFile { scenario: self.scenario, mode: self.mode, config, content_hash, classes }
    }

    /// Rebuilds a registry by classifying every stored representative in
    /// order. Records equivalent to an earlier one are dropped.
    pub fn from_file(file: &RegistryFile) -> Result<Self, FacetError> {
        let reg = Registry::new(file.scenario, file.mode);
        for rec in &file.classes {
            reg.classify_inequality(&rec.representative, rec.provenance.clone())?;
        }
        Ok(reg)
    }
}

pub fn orbit_histogram(records: &[ClassRecord]) -> BTreeMap<u64, usize> {
    let mut h = BTreeMap::new();
    for r in records {
        if let Some(o) = r.orbit_size {
            *h.entry(o).or_insert(0) += 1;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facetgen::tests::chsh;
    use crate::scenario::{Relabel, Relabelling};

    #[test]
    fn relabelled_chsh_is_known() {
        let b = chsh();
        let reg = Registry::new(b.scenario, EquivalenceMode::Full);
        assert_eq!(reg.insert_positivity(), Classification::New(0));
        let first = reg.classify_inequality(&b, Provenance::Imported { source: "test".into() }).unwrap();
        assert_eq!(first, Classification::New(1));
        let r = Relabelling { meas_perm_b: vec![1, 0], ..Relabelling::identity(b.scenario) };
        let second = reg
            .classify_inequality(&b.relabel(&r).unwrap(), Provenance::Imported { source: "test".into() })
            .unwrap();
        assert_eq!(second, Classification::Known(1));
        assert_eq!(reg.total_facets(), 24);
    }

    #[test]
    fn file_round_trip() {
        let b = chsh();
        let reg = Registry::new(b.scenario, EquivalenceMode::Full);
        reg.insert_positivity();
        reg.classify_inequality(&b, Provenance::Seed { seed: 0, pair: Some((1, 2)), eta: Some(rational::ratio(1, 100)) })
            .unwrap();
        let file = reg.to_file(serde_json::json!({"note": "t"}));
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: RegistryFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.classes.len(), 2);
        assert_eq!(back.content_hash, RegistryFile::compute_content_hash(&back.classes));
        let rebuilt = Registry::from_file(&back).unwrap();
        assert_eq!(rebuilt.len(), 2);
        assert_eq!(rebuilt.to_file(serde_json::json!({"note": "t"})).content_hash, file.content_hash);
    }
}
