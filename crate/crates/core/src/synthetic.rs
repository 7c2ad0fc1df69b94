//! Deterministic synthetic knowledge graphs with exact shape statistics.
//!
//! Generated graphs are complete closures of simple relational rules, so
//! filtered evaluation behaves the way it does on curated benchmarks:
//!
//! - relation 0 is a cycle `(eᵢ, r0, eᵢ₊₁)`, guaranteeing every entity
//!   appears;
//! - most relations are unions of group blocks: entities are partitioned
//!   into groups, and an active block `(r, g)` relates every member of
//!   source group `g` to every member of a target group `σ_r(g)`;
//! - the last relation is a self-loop filler `(eᵢ, r, eᵢ)` sized to land on
//!   the requested triple total exactly.
//!
//! Every true triple of every rule is included, so ranking a held-out
//! triple never competes against unlabeled positives.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::RawTriple;

/// Target vocabulary and split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KgShape {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl KgShape {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

/// Shape of the UMLS benchmark.
pub fn umls_shape() -> KgShape {
    KgShape { entities: 135, relations: 46, train: 5216, valid: 652, test: 661 }
}

/// Shape of the Kinship benchmark.
pub fn kinship_shape() -> KgShape {
    KgShape { entities: 104, relations: 25, train: 8544, valid: 1068, test: 1074 }
}

/// Shape of the FB15k-237 benchmark.
pub fn fb15k237_shape() -> KgShape {
    KgShape { entities: 14541, relations: 237, train: 272115, valid: 17535, test: 20466 }
}

/// Shape of the WN18RR benchmark.
pub fn wn18rr_shape() -> KgShape {
    KgShape { entities: 40943, relations: 11, train: 86835, valid: 3034, test: 3134 }
}

/// Shape of the YAGO3-10 benchmark.
pub fn yago310_shape() -> KgShape {
    KgShape { entities: 123182, relations: 37, train: 1079040, valid: 5000, test: 5000 }
}

/// A generated dataset, split to the requested sizes.
#[derive(Debug, Clone)]
pub struct SyntheticKg {
    pub train: Vec<RawTriple>,
    pub valid: Vec<RawTriple>,
    pub test: Vec<RawTriple>,
}

impl SyntheticKg {
    /// Write `train.txt` / `valid.txt` / `test.txt` under a directory.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, triples) in [
            ("train.txt", &self.train),
            ("valid.txt", &self.valid),
            ("test.txt", &self.test),
        ] {
            let mut buf = String::with_capacity(triples.len() * 24);
            for t in triples {
                buf.push_str(&t.head);
                buf.push('\t');
                buf.push_str(&t.relation);
                buf.push('\t');
                buf.push_str(&t.tail);
                buf.push('\n');
            }
            let mut file = fs::File::create(dir.join(name))?;
            file.write_all(buf.as_bytes())?;
        }
        Ok(())
    }
}

fn entity_name(i: usize) -> String {
    format!("e{i:05}")
}

fn relation_name(j: usize) -> String {
    format!("r{j:03}")
}

/// Relational flavor of a block, chosen per relation. The mix gives the
/// graph heterogeneous fan-outs, matching the degree skew of curated
/// benchmarks: wide many-to-many blocks, narrow blocks, and hub relations
/// whose single shared target needs sharp score separation.
fn block_kind(rel: usize) -> usize {
    rel % 3
}

/// Generate a grouped synthetic KG with exactly the requested shape.
///
/// Groups get skewed sizes (hubs plus a tail of small groups), so average
/// node degree carries benchmark-like variance.
pub fn grouped_kg(shape: &KgShape, n_groups: usize, seed: u64) -> Result<SyntheticKg> {
    let e = shape.entities;
    let r = shape.relations;
    let total = shape.total();
    if r < 3 {
        return Err(Error::Config("grouped_kg needs at least 3 relations".into()));
    }
    if n_groups < 2 || n_groups > e {
        return Err(Error::Config("group count must lie in 2..=entities".into()));
    }
    if total < 2 * e + 2 {
        return Err(Error::Config(
            "triple total too small for the coverage cycle and self-loop filler".into(),
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // Skewed group sizes: geometric weights, at least 2 members each,
    // adjusted to sum to E exactly (largest groups absorb the remainder).
    let rho: f64 = 0.87;
    let weights: Vec<f64> = (0..n_groups).map(|k| rho.powi(k as i32)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((w / wsum * e as f64).floor() as usize).max(2))
        .collect();
    let mut assigned: usize = sizes.iter().sum();
    let mut k = 0;
    while assigned < e {
        sizes[k % n_groups] += 1;
        assigned += 1;
        k += 1;
    }
    while assigned > e {
        let idx = sizes
            .iter()
            .enumerate()
            .max_by_key(|(_, &s)| s)
            .map(|(i, _)| i)
            .expect("nonempty");
        if sizes[idx] <= 2 {
            return Err(Error::Config("too many groups for the entity count".into()));
        }
        sizes[idx] -= 1;
        assigned -= 1;
    }
    let largest = *sizes.iter().max().expect("nonempty");
    if largest * largest > total - 2 * e {
        return Err(Error::Config("largest group block exceeds the triple budget".into()));
    }

    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(n_groups);
    let mut next = 0;
    for &s in &sizes {
        groups.push((next..next + s).collect());
        next += s;
    }

    // Relation 0: the coverage cycle. Kept out of the held-out splits —
    // a permutation is unpredictable for pairs never seen in training.
    let mut cycle: Vec<RawTriple> = (0..e)
        .map(|i| {
            RawTriple::new(entity_name(i), relation_name(0), entity_name((i + 1) % e))
        })
        .collect();

    let mut triples: Vec<RawTriple> = Vec::with_capacity(total - e);

    // Block relations 1..R-1: one guaranteed block each, then random blocks
    // while the budget stays above the self-loop filler band.
    let filler_rel = r - 1;
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for rel in 1..filler_rel {
        for g in 0..n_groups {
            candidates.push((rel, g));
        }
    }
    candidates.shuffle(&mut rng);
    let mut guaranteed: Vec<(usize, usize)> = Vec::new();
    let mut rest: Vec<(usize, usize)> = Vec::new();
    let mut seen_rel = vec![false; r];
    for &(rel, g) in &candidates {
        if !seen_rel[rel] {
            seen_rel[rel] = true;
            guaranteed.push((rel, g));
        } else {
            rest.push((rel, g));
        }
    }

    // Leave between E/2 and E triples for the self-loop relation.
    let floor = e / 2;
    let mut remaining = total - e;
    let mut placed = vec![false; r];
    for (rel, g) in guaranteed.into_iter().chain(rest) {
        let tgt = rng.gen_range(0..n_groups);
        let src_members = &groups[g];
        let tgt_members = &groups[tgt];
        let block: Vec<(usize, usize)> = match block_kind(rel) {
            // Wide: full bipartite block.
            1 => src_members
                .iter()
                .flat_map(|&h| tgt_members.iter().map(move |&t| (h, t)))
                .collect(),
            // Narrow: each source relates to a quarter of the targets.
            2 => {
                let span = tgt_members.len().div_ceil(4);
                src_members
                    .iter()
                    .flat_map(|&h| tgt_members[..span].iter().map(move |&t| (h, t)))
                    .collect()
            }
            // Hub: every source shares one popular target.
            _ => src_members.iter().map(|&h| (h, tgt_members[0])).collect(),
        };
        let block_len = block.len();
        if block_len + floor > remaining {
            continue;
        }
        for (h, t) in block {
            triples.push(RawTriple::new(
                entity_name(h),
                relation_name(rel),
                entity_name(t),
            ));
        }
        placed[rel] = true;
        remaining -= block_len;
    }
    if let Some(missing) = (1..filler_rel).find(|&rel| !placed[rel]) {
        return Err(Error::Config(format!(
            "budget exhausted before relation {missing} was placed; use more groups"
        )));
    }

    // Self-loop filler to the exact total.
    if remaining > e {
        return Err(Error::Config(format!(
            "generator left {remaining} triples for a filler of at most {e}"
        )));
    }
    for i in 0..remaining {
        triples.push(RawTriple::new(
            entity_name(i),
            relation_name(filler_rel),
            entity_name(i),
        ));
    }
    debug_assert_eq!(triples.len(), total - e);
    if triples.len() < shape.valid + shape.test {
        return Err(Error::Config(
            "valid+test larger than the generated non-cycle triples".into(),
        ));
    }

    triples.shuffle(&mut rng);
    let valid = triples.split_off(triples.len() - shape.valid);
    let test = triples.split_off(triples.len() - shape.test);
    let mut train = cycle.drain(..).chain(triples).collect::<Vec<_>>();
    train.shuffle(&mut rng);
    debug_assert_eq!(train.len(), shape.train);
    Ok(SyntheticKg { train, valid, test })
}
