//! Detection-score ingestion and grouping.
//!
//! The universal input is a [`PairScoreTable`]: a mapping from ordered
//! speaker pair `(enroll, test)` to the multiset of nontarget scores
//! observed for that pair. Tables are built from CSV or JSON-lines files
//! with columns/keys `enroll,test,score[,partition]` and are immutable
//! once built, so they can be shared freely across threads.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Opaque speaker token. Equality is exact token match.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpeakerId(pub String);

impl SpeakerId {
    pub fn new(id: impl Into<String>) -> Self {
        SpeakerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SpeakerId {
    fn from(s: &str) -> Self {
        SpeakerId(s.to_string())
    }
}

/// One nontarget trial: a score between an enrolled speaker and a different
/// test speaker, optionally tagged with a partition label (e.g. gender).
#[derive(Debug, Clone)]
pub struct ScoreRecord {
    pub enroll: SpeakerId,
    pub test: SpeakerId,
    pub score: f64,
    pub partition: Option<String>,
}

/// Non-empty multiset of finite scores for one speaker pair, with the
/// arithmetic mean cached at construction.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    scores: Vec<f64>,
    mean: f64,
}

impl ScoreSet {
    /// Builds a score set. Errors on an empty or non-finite input.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Invalid("score set must be non-empty".into()));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Invalid(format!("non-finite score {s} in score set")));
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        Ok(ScoreSet { scores, mean })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    /// Cached arithmetic mean of the scores.
    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// Detection scores grouped by ordered speaker pair.
///
/// Speakers appearing on the enroll side are the candidate targets of a
/// worst-case simulation; speakers appearing on the test side are the
/// candidate impostors. One table holds one partition.
#[derive(Debug, Clone)]
pub struct PairScoreTable {
    speakers: Vec<SpeakerId>,
    // pair sets sorted by (enroll, test) index so iteration order is
    // deterministic; the map only points into the list
    pair_list: Vec<(u32, u32, ScoreSet)>,
    pair_index: HashMap<(u32, u32), u32>,
    enroll_ids: Vec<u32>,
    test_ids: Vec<u32>,
    partition: Option<String>,
    total_scores: usize,
}

impl PairScoreTable {
    /// Groups records into a table. Records must already be filtered to a
    /// single partition.
    pub fn from_records(records: Vec<ScoreRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyResult("no records to group".into()));
        }
        let mut partition: Option<Option<String>> = None;
        for r in &records {
            if r.enroll == r.test {
                return Err(Error::Invalid(format!(
                    "nontarget record with enroll == test ({})",
                    r.enroll
                )));
            }
            match &partition {
                None => partition = Some(r.partition.clone()),
                Some(p) if *p != r.partition => {
                    return Err(Error::MixedPartitions(format!(
                        "{:?} vs {:?}",
                        p, r.partition
                    )))
                }
                _ => {}
            }
        }
        let partition = partition.unwrap_or(None);

        let mut speakers: Vec<SpeakerId> = records
            .iter()
            .flat_map(|r| [r.enroll.clone(), r.test.clone()])
            .collect();
        speakers.sort_unstable();
        speakers.dedup();
        let index: HashMap<&SpeakerId, u32> = speakers
            .iter()
            .enumerate()
            .map(|(i, s)| (s, i as u32))
            .collect();

        let mut grouped: HashMap<(u32, u32), Vec<f64>> = HashMap::new();
        for r in &records {
            let key = (index[&r.enroll], index[&r.test]);
            grouped.entry(key).or_default().push(r.score);
        }

        let total_scores = records.len();
        let mut pair_list: Vec<(u32, u32, ScoreSet)> = Vec::with_capacity(grouped.len());
        let mut enroll_ids: Vec<u32> = Vec::new();
        let mut test_ids: Vec<u32> = Vec::new();
        for ((e, t), scores) in grouped {
            enroll_ids.push(e);
            test_ids.push(t);
            pair_list.push((e, t, ScoreSet::new(scores)?));
        }
        pair_list.sort_unstable_by_key(|(e, t, _)| (*e, *t));
        let pair_index = pair_list
            .iter()
            .enumerate()
            .map(|(i, (e, t, _))| ((*e, *t), i as u32))
            .collect();
        enroll_ids.sort_unstable();
        enroll_ids.dedup();
        test_ids.sort_unstable();
        test_ids.dedup();

        Ok(PairScoreTable {
            speakers,
            pair_list,
            pair_index,
            enroll_ids,
            test_ids,
            partition,
            total_scores,
        })
    }

    /// All distinct speakers, sorted by token.
    pub fn speakers(&self) -> &[SpeakerId] {
        &self.speakers
    }

    pub fn speaker(&self, idx: u32) -> &SpeakerId {
        &self.speakers[idx as usize]
    }

    /// Indices of speakers that appear on the enroll side, sorted.
    pub fn enroll_ids(&self) -> &[u32] {
        &self.enroll_ids
    }

    /// Indices of speakers that appear on the test side, sorted.
    pub fn test_ids(&self) -> &[u32] {
        &self.test_ids
    }

    pub fn partition(&self) -> Option<&str> {
        self.partition.as_deref()
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_list.len()
    }

    /// Total number of retained input rows (grouping is lossless).
    pub fn total_scores(&self) -> usize {
        self.total_scores
    }

    /// Score set for an ordered pair, by speaker token.
    pub fn scores(&self, enroll: &SpeakerId, test: &SpeakerId) -> Option<&ScoreSet> {
        let e = self.speakers.binary_search(enroll).ok()? as u32;
        let t = self.speakers.binary_search(test).ok()? as u32;
        self.scores_by_index(e, t)
    }

    /// Score set for an ordered pair, by speaker index.
    pub fn scores_by_index(&self, enroll: u32, test: u32) -> Option<&ScoreSet> {
        self.pair_index
            .get(&(enroll, test))
            .map(|&i| &self.pair_list[i as usize].2)
    }

    /// Iterates over all `(enroll, test, scores)` entries in (enroll, test) order.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (u32, u32, &ScoreSet)> {
        self.pair_list.iter().map(|(e, t, s)| (*e, *t, s))
    }

    /// All scores in the table, pooled across pairs, in pair order.
    pub fn pooled_scores(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_scores);
        for (_, _, set) in &self.pair_list {
            out.extend_from_slice(set.scores());
        }
        out
    }

    /// Empirical quantile of the pooled scores (linear interpolation).
    pub fn pooled_quantile(&self, q: f64) -> f64 {
        let mut s = self.pooled_scores();
        s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        quantile_sorted(&s, q)
    }

    /// Standard deviation of the pooled scores (population form).
    pub fn pooled_std(&self) -> f64 {
        let s = self.pooled_scores();
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        (s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
    }
}

/// Empirical quantile of an ascending-sorted slice, interpolating linearly
/// between order statistics.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// On-disk score formats accepted by [`load_score_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Csv,
    Jsonl,
}

#[derive(Deserialize)]
struct JsonRow {
    enroll: String,
    test: String,
    score: f64,
    #[serde(default)]
    partition: Option<String>,
}

/// Loads and groups a score file.
///
/// `partition_filter`, when given, keeps only rows whose partition label
/// matches; the resulting table carries that label. Without a filter the
/// input must already be single-partition.
pub fn load_score_table(
    path: impl AsRef<Path>,
    format: ScoreFormat,
    partition_filter: Option<&str>,
) -> Result<PairScoreTable> {
    let path = path.as_ref();
    let records = match format {
        ScoreFormat::Csv => read_csv(path)?,
        ScoreFormat::Jsonl => read_jsonl(path)?,
    };
    let filtered: Vec<ScoreRecord> = match partition_filter {
        Some(p) => records
            .into_iter()
            .filter(|r| r.partition.as_deref() == Some(p))
            .collect(),
        None => records,
    };
    if filtered.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no rows retained from {}",
            path.display()
        )));
    }
    let mut table = PairScoreTable::from_records(filtered)?;
    if partition_filter.is_some() {
        table.partition = partition_filter.map(str::to_string);
    }
    Ok(table)
}

fn read_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::MalformedRow {
            line: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (e_col, t_col, s_col) = match (col("enroll"), col("test"), col("score")) {
        (Some(e), Some(t), Some(s)) => (e, t, s),
        _ => {
            return Err(Error::MalformedRow {
                line: 1,
                msg: "header must contain enroll,test,score".into(),
            })
        }
    };
    let p_col = col("partition");

    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or_default(),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| {
            rec.get(i).ok_or(Error::MalformedRow {
                line,
                msg: format!("missing column {i}"),
            })
        };
        let score_txt = field(s_col)?;
        let score: f64 = score_txt.parse().map_err(|_| Error::MalformedRow {
            line,
            msg: format!("invalid score {score_txt:?}"),
        })?;
        if !score.is_finite() {
            return Err(Error::NonFiniteScore { line });
        }
        let enroll = field(e_col)?;
        let test = field(t_col)?;
        if enroll.is_empty() || test.is_empty() {
            return Err(Error::MalformedRow {
                line,
                msg: "empty speaker id".into(),
            });
        }
        out.push(ScoreRecord {
            enroll: SpeakerId::new(enroll),
            test: SpeakerId::new(test),
            score,
            partition: p_col
                .and_then(|i| rec.get(i))
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        });
    }
    Ok(out)
}

fn read_jsonl(path: &Path) -> Result<Vec<ScoreRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: line_no,
            msg: e.to_string(),
        })?;
        if !row.score.is_finite() {
            return Err(Error::NonFiniteScore { line: line_no });
        }
        if row.enroll.is_empty() || row.test.is_empty() {
            return Err(Error::MalformedRow {
                line: line_no,
                msg: "empty speaker id".into(),
            });
        }
        out.push(ScoreRecord {
            enroll: SpeakerId::new(row.enroll),
            test: SpeakerId::new(row.test),
            score: row.score,
            partition: row.partition,
        });
    }
    Ok(out)
}

/// Reads a plain list of scores, one per line, skipping an optional
/// `score` header. Used for target-trial scores in DCF threshold search.
pub fn load_score_list(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let txt = line.trim();
        if txt.is_empty() || (i == 0 && txt.eq_ignore_ascii_case("score")) {
            continue;
        }
        let v: f64 = txt.parse().map_err(|_| Error::MalformedRow {
            line: i + 1,
            msg: format!("invalid score {txt:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFiniteScore { line: i + 1 });
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no scores in {}",
            path.display()
        )));
    }
    Ok(out)
}
