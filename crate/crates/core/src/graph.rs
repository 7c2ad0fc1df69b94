//! Dataset ingestion, vocabularies, reciprocal augmentation, KvsAll target
//! indexing, and the filtered-evaluation index.
//!
//! Datasets are directories of `train.txt` / `valid.txt` / `test.txt`, one
//! tab-separated `head<TAB>relation<TAB>tail` triple per line.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Suffix reserved for reciprocal relations; rejected in input data.
pub const RECIPROCAL_SUFFIX: &str = "_reverse";

/// A triple as read from disk, before id assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl RawTriple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        RawTriple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// Which split a triple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Parse one dataset file. Duplicate lines are preserved; surrounding
/// whitespace is trimmed; blank lines are skipped.
pub fn load_triples(path: &Path) -> Result<Vec<RawTriple>> {
    let file = File::open(path)?;
    parse_triples(BufReader::new(file))
}

/// Parse triples from any reader (see [`load_triples`]).
pub fn parse_triples<R: BufRead>(reader: R) -> Result<Vec<RawTriple>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty field".into(),
            });
        }
        if fields[1].contains(RECIPROCAL_SUFFIX) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("relation name contains reserved marker {RECIPROCAL_SUFFIX:?}"),
            });
        }
        out.push(RawTriple::new(fields[0], fields[1], fields[2]));
    }
    Ok(out)
}

/// Entity/relation vocabularies, id-encoded splits, and the KvsAll and
/// filtered-ranking indexes. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TripleStore {
    entities: Vec<String>,
    relations: Vec<String>,
    n_raw_relations: usize,
    entity_ids: HashMap<String, u32>,
    relation_ids: HashMap<String, u32>,
    train: Vec<[u32; 3]>,
    valid: Vec<[u32; 3]>,
    test: Vec<[u32; 3]>,
    /// (h, r) → sorted tail ids over the train split.
    kvsall: HashMap<(u32, u32), Vec<u32>>,
    /// (h, r) → sorted tail ids over train ∪ valid ∪ test.
    filter: HashMap<(u32, u32), Vec<u32>>,
}

/// Serializable mirror of a store; indexes are rebuilt on load.
#[derive(Serialize, Deserialize)]
struct StoreData {
    entities: Vec<String>,
    relations: Vec<String>,
    n_raw_relations: usize,
    train: Vec<[u32; 3]>,
    valid: Vec<[u32; 3]>,
    test: Vec<[u32; 3]>,
}

/// Build a store from raw splits. Vocabularies use first-appearance order
/// across train → valid → test. With `add_reciprocals`, every raw relation
/// `r` gains a reverse `r_reverse` and every split gains `(t, r_reverse, h)`
/// for each of its raw triples.
pub fn build_store(
    train: &[RawTriple],
    valid: &[RawTriple],
    test: &[RawTriple],
    add_reciprocals: bool,
) -> TripleStore {
    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut entity_ids: HashMap<String, u32> = HashMap::new();
    let mut relation_ids: HashMap<String, u32> = HashMap::new();
    for split in [train, valid, test] {
        for t in split {
            for name in [&t.head, &t.tail] {
                if !entity_ids.contains_key(name) {
                    entity_ids.insert(name.clone(), entities.len() as u32);
                    entities.push(name.clone());
                }
            }
            if !relation_ids.contains_key(&t.relation) {
                relation_ids.insert(t.relation.clone(), relations.len() as u32);
                relations.push(t.relation.clone());
            }
        }
    }
    let n_raw_relations = relations.len();
    if add_reciprocals {
        for i in 0..n_raw_relations {
            let rev = format!("{}{}", relations[i], RECIPROCAL_SUFFIX);
            relation_ids.insert(rev.clone(), (n_raw_relations + i) as u32);
            relations.push(rev);
        }
    }

    let encode = |split: &[RawTriple]| -> Vec<[u32; 3]> {
        let mut ids: Vec<[u32; 3]> = split
            .iter()
            .map(|t| {
                [
                    entity_ids[&t.head],
                    relation_ids[&t.relation],
                    entity_ids[&t.tail],
                ]
            })
            .collect();
        if add_reciprocals {
            let raw_len = ids.len();
            for i in 0..raw_len {
                let [h, r, t] = ids[i];
                ids.push([t, r + n_raw_relations as u32, h]);
            }
        }
        ids
    };

    let (train, valid, test) = (encode(train), encode(valid), encode(test));
    let mut store = TripleStore {
        entities,
        relations,
        n_raw_relations,
        entity_ids,
        relation_ids,
        train,
        valid,
        test,
        kvsall: HashMap::new(),
        filter: HashMap::new(),
    };
    store.rebuild_indexes();
    store
}

/// Load `train.txt` / `valid.txt` / `test.txt` from a dataset directory.
pub fn load_dataset_dir(dir: &Path, add_reciprocals: bool) -> Result<TripleStore> {
    let train = load_triples(&dir.join("train.txt"))?;
    let valid = load_triples(&dir.join("valid.txt"))?;
    let test = load_triples(&dir.join("test.txt"))?;
    Ok(build_store(&train, &valid, &test, add_reciprocals))
}

impl TripleStore {
    fn rebuild_indexes(&mut self) {
        let mut kvsall: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for &[h, r, t] in &self.train {
            kvsall.entry((h, r)).or_default().push(t);
        }
        let mut filter: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for split in [&self.train, &self.valid, &self.test] {
            for &[h, r, t] in split {
                filter.entry((h, r)).or_default().push(t);
            }
        }
        for tails in kvsall.values_mut().chain(filter.values_mut()) {
            tails.sort_unstable();
            tails.dedup();
        }
        self.kvsall = kvsall;
        self.filter = filter;
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_raw_relations(&self) -> usize {
        self.n_raw_relations
    }

    pub fn has_reciprocals(&self) -> bool {
        self.relations.len() == 2 * self.n_raw_relations && self.n_raw_relations > 0
    }

    pub fn entity_name(&self, id: u32) -> &str {
        &self.entities[id as usize]
    }

    pub fn relation_name(&self, id: u32) -> &str {
        &self.relations[id as usize]
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_ids.get(name).copied()
    }

    /// Whether a relation id denotes a reciprocal relation.
    pub fn is_reverse(&self, relation: u32) -> bool {
        (relation as usize) >= self.n_raw_relations
    }

    /// The raw relation id behind a possibly-reciprocal id.
    pub fn raw_relation_of(&self, relation: u32) -> u32 {
        if self.is_reverse(relation) {
            relation - self.n_raw_relations as u32
        } else {
            relation
        }
    }

    pub fn split(&self, split: Split) -> &[[u32; 3]] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Triples of a split restricted to raw (non-reciprocal) relations.
    pub fn raw_split(&self, split: Split) -> Vec<[u32; 3]> {
        self.split(split)
            .iter()
            .copied()
            .filter(|&[_, r, _]| !self.is_reverse(r))
            .collect()
    }

    /// Number of distinct triples in a split (duplicates collapsed).
    pub fn unique_count(&self, split: Split) -> usize {
        let set: HashSet<[u32; 3]> = self.split(split).iter().copied().collect();
        set.len()
    }

    /// Sorted tails known for `(h, r)` in the train split; empty if none.
    pub fn kvsall_tails(&self, h: u32, r: u32) -> &[u32] {
        self.kvsall.get(&(h, r)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Label-smoothed KvsAll target plane of length `n_entities`:
    /// `y' = y·(1−ε) + ε/|E|`. Unknown pairs yield the all-`ε/|E|` plane.
    pub fn kvsall_targets(&self, h: u32, r: u32, smoothing: f64) -> Vec<f64> {
        let n = self.n_entities();
        let base = smoothing / n as f64;
        let mut plane = vec![base; n];
        let hit = 1.0 - smoothing + base;
        for &t in self.kvsall_tails(h, r) {
            plane[t as usize] = hit;
        }
        plane
    }

    /// Entity ids to exclude when ranking the gold tail of `(h, r)`:
    /// all tails known anywhere for the pair, except the gold one.
    pub fn filter_candidates(&self, h: u32, r: u32, gold: u32) -> Vec<u32> {
        match self.filter.get(&(h, r)) {
            None => Vec::new(),
            Some(tails) => tails.iter().copied().filter(|&t| t != gold).collect(),
        }
    }

    /// Distinct train-split `(h, r)` pairs in first-appearance order.
    pub fn distinct_train_pairs(&self) -> Vec<(u32, u32)> {
        let mut seen = HashSet::new();
        let mut pairs = Vec::new();
        for &[h, r, _] in &self.train {
            if seen.insert((h, r)) {
                pairs.push((h, r));
            }
        }
        pairs
    }

    /// SHA-256 over the ordered vocabularies; identifies the id assignment.
    pub fn vocab_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for name in &self.entities {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update([1u8]);
        for name in &self.relations {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hasher.finalize().into()
    }

    /// Serialize vocabularies and splits as JSON; indexes are derived data.
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        let data = StoreData {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            n_raw_relations: self.n_raw_relations,
            train: self.train.clone(),
            valid: self.valid.clone(),
            test: self.test.clone(),
        };
        serde_json::to_writer(writer, &data)
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))
    }

    /// Inverse of [`TripleStore::save`]; rebuilds the indexes.
    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let data: StoreData = serde_json::from_reader(reader)
            .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        let entity_ids = data
            .entities
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        let relation_ids = data
            .relations
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        let mut store = TripleStore {
            entities: data.entities,
            relations: data.relations,
            n_raw_relations: data.n_raw_relations,
            entity_ids,
            relation_ids,
            train: data.train,
            valid: data.valid,
            test: data.test,
            kvsall: HashMap::new(),
            filter: HashMap::new(),
        };
        store.rebuild_indexes();
        Ok(store)
    }
}
