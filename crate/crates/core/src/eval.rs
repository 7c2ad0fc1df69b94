//! Filtered ranking evaluation: MRR and Hits@{1,3,10}, per-relation and
//! per-direction breakdowns, and score-averaging ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Split, TripleStore};
use crate::model::ModelParams;
use crate::nn::Mode;

/// Which queries are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Rank the tail of every test triple including reciprocals, so head
    /// prediction is covered through the reverse relations.
    HeadAndTail,
    /// Rank tails of raw test triples only.
    TailOnly,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::HeadAndTail => "head_and_tail",
            EvalMode::TailOnly => "tail_only",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "head-and-tail" => Ok(EvalMode::HeadAndTail),
            "tail-only" => Ok(EvalMode::TailOnly),
            other => Err(Error::Config(format!(
                "eval mode must be head-and-tail or tail-only, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Prediction direction of a ranked query, relative to the raw triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Tail,
    Head,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Tail => "tail",
            Direction::Head => "head",
        }
    }
}

/// One per-relation (optionally per-direction) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerRelationRow {
    pub relation: String,
    /// `None` when directions are pooled.
    pub direction: Option<Direction>,
    pub mrr: f64,
    pub count: usize,
}

/// Aggregate filtered-ranking metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mode: EvalMode,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_test: usize,
    /// Populated by [`per_relation_report`]; empty otherwise.
    pub per_relation: Vec<PerRelationRow>,
}

impl RankingReport {
    /// Key-value text with a stable key order.
    pub fn to_text(&self) -> String {
        format!(
            "mode\t{}\nn_test\t{}\nmrr\t{:.6}\nhits@1\t{:.6}\nhits@3\t{:.6}\nhits@10\t{:.6}\n",
            self.mode, self.n_test, self.mrr, self.hits1, self.hits3, self.hits10
        )
    }

    /// Tabular dump: `relation<TAB>direction<TAB>mrr<TAB>count` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("relation\tdirection\tmrr\tcount\n");
        for row in &self.per_relation {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\n",
                row.relation,
                row.direction.map(Direction::name).unwrap_or("both"),
                row.mrr,
                row.count
            ));
        }
        out
    }
}

/// Filtered rank of the gold entity in a score plane, with mid-rank tie
/// handling: `1 + #{better} + ⌈#{ties}/2⌉` over non-excluded candidates.
pub fn filtered_rank(scores: &[f64], gold: u32, exclusions: &[u32]) -> Result<usize> {
    if exclusions.binary_search(&gold).is_ok() {
        return Err(Error::Contract("gold entity appears in the exclusion set".into()));
    }
    let gold_score = *scores
        .get(gold as usize)
        .ok_or_else(|| Error::Contract(format!("gold id {gold} outside the score plane")))?;
    let mut greater = 0usize;
    let mut ties = 0usize;
    for (x, &s) in scores.iter().enumerate() {
        if x == gold as usize || exclusions.binary_search(&(x as u32)).is_ok() {
            continue;
        }
        if s > gold_score {
            greater += 1;
        } else if s == gold_score {
            ties += 1;
        }
    }
    Ok(1 + greater + ties.div_ceil(2))
}

/// Arithmetic mean of congruent score planes.
pub fn ensemble_scores(planes: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = planes
        .first()
        .ok_or_else(|| Error::Contract("ensemble of zero models".into()))?;
    let len = first.len();
    if planes.iter().any(|p| p.len() != len) {
        return Err(Error::Shape("ensemble planes differ in length".into()));
    }
    let scale = 1.0 / planes.len() as f64;
    let mut out = vec![0.0; len];
    for plane in planes {
        for (o, &v) in out.iter_mut().zip(plane) {
            *o += v;
        }
    }
    for o in &mut out {
        *o *= scale;
    }
    Ok(out)
}

/// Mean post-sigmoid probability plane of an ensemble for one (h, r) pair.
fn ensemble_prob_plane(models: &[&ModelParams], h: u32, r: u32) -> Result<Vec<f64>> {
    let planes: Vec<Vec<f64>> = models
        .iter()
        .map(|m| {
            m.score_all_tails(h, r, Mode::Eval).map(|mut plane| {
                for v in &mut plane {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
                plane
            })
        })
        .collect::<Result<_>>()?;
    ensemble_scores(&planes)
}

struct RankedQuery {
    raw_relation: u32,
    direction: Direction,
    rank: usize,
}

fn rank_queries(
    models: &[&ModelParams],
    store: &TripleStore,
    mode: EvalMode,
    split: Split,
) -> Result<Vec<RankedQuery>> {
    if models.is_empty() {
        return Err(Error::Contract("ensemble of zero models".into()));
    }
    for m in models {
        m.check_store(store)?;
    }
    let queries: Vec<[u32; 3]> = match mode {
        EvalMode::HeadAndTail => store.split(split).to_vec(),
        EvalMode::TailOnly => store.raw_split(split),
    };
    if queries.is_empty() {
        return Err(Error::Contract("no test queries to rank".into()));
    }
    queries
        .par_iter()
        .map(|&[h, r, gold]| {
            let plane = ensemble_prob_plane(models, h, r)?;
            let exclusions = store.filter_candidates(h, r, gold);
            let rank = filtered_rank(&plane, gold, &exclusions)?;
            Ok(RankedQuery {
                raw_relation: store.raw_relation_of(r),
                direction: if store.is_reverse(r) {
                    Direction::Head
                } else {
                    Direction::Tail
                },
                rank,
            })
        })
        .collect()
}

fn aggregate(mode: EvalMode, ranked: &[RankedQuery]) -> RankingReport {
    let n = ranked.len();
    let mut rr_sum = 0.0;
    let (mut h1, mut h3, mut h10) = (0usize, 0usize, 0usize);
    for q in ranked {
        rr_sum += 1.0 / q.rank as f64;
        if q.rank <= 1 {
            h1 += 1;
        }
        if q.rank <= 3 {
            h3 += 1;
        }
        if q.rank <= 10 {
            h10 += 1;
        }
    }
    RankingReport {
        mode,
        mrr: rr_sum / n as f64,
        hits1: h1 as f64 / n as f64,
        hits3: h3 as f64 / n as f64,
        hits10: h10 as f64 / n as f64,
        n_test: n,
        per_relation: Vec::new(),
    }
}

/// Filtered-ranking evaluation of a single model or a score-averaging
/// ensemble over the test split.
pub fn evaluate(models: &[&ModelParams], store: &TripleStore, mode: EvalMode) -> Result<RankingReport> {
    evaluate_on(models, store, mode, Split::Test)
}

/// [`evaluate`] over an arbitrary split (the CLI reports on valid + test).
pub fn evaluate_on(
    models: &[&ModelParams],
    store: &TripleStore,
    mode: EvalMode,
    split: Split,
) -> Result<RankingReport> {
    let ranked = rank_queries(models, store, mode, split)?;
    Ok(aggregate(mode, &ranked))
}

/// [`evaluate`] with per-relation aggregates, optionally split by prediction
/// direction. Rows are ordered by raw relation id, tails before heads.
pub fn per_relation_report(
    models: &[&ModelParams],
    store: &TripleStore,
    mode: EvalMode,
    split_direction: bool,
) -> Result<RankingReport> {
    let ranked = rank_queries(models, store, mode, Split::Test)?;
    let mut report = aggregate(mode, &ranked);

    let n_raw = store.n_raw_relations();
    let directions: &[Option<Direction>] = if split_direction {
        &[Some(Direction::Tail), Some(Direction::Head)]
    } else {
        &[None]
    };
    for raw in 0..n_raw as u32 {
        for &dir in directions {
            let mut rr_sum = 0.0;
            let mut count = 0usize;
            for q in &ranked {
                if q.raw_relation != raw {
                    continue;
                }
                if let Some(d) = dir {
                    if q.direction != d {
                        continue;
                    }
                }
                rr_sum += 1.0 / q.rank as f64;
                count += 1;
            }
            if count > 0 {
                report.per_relation.push(PerRelationRow {
                    relation: store.relation_name(raw).to_string(),
                    direction: dir,
                    mrr: rr_sum / count as f64,
                    count,
                });
            }
        }
    }
    Ok(report)
}
