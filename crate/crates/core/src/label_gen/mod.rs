//! Training lists from search sessions.
//!
//! A session records the results a searcher saw and what they did with
//! each one. Co-inmail labeling turns a keyword session into a
//! query-by-example list: some inmailed results become the ideal
//! candidates and the rest of the page is graded by action.

mod simulator;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use simulator::{
    ActionCurve, AffinityWeights, Archetype, SimConfig, Simulator, KEYWORD_RANKER_WEIGHTS,
};

use crate::corpus::MemberId;
use crate::error::{Error, Result};
use crate::features::Registry;
use crate::ltr::{Grade, GradeScheme};
use crate::query_builder::{StructuredQuery, MAX_IDEAL_CANDIDATES};
use crate::scalar::Scalar;
use crate::synth::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Inmailed,
    Clicked,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionKind {
    /// Free-text keyword search.
    Keyword,
    /// Query-by-example search with randomized top results.
    Example,
}

/// One search and the searcher's reaction to every shown result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: u64,
    pub searcher_id: u64,
    pub kind: SessionKind,
    pub keyword_query: String,
    /// The facet query that produced the results.
    pub query: StructuredQuery<f64>,
    /// Input candidates of an example search; empty for keyword searches.
    #[serde(default)]
    pub ideal_candidates: Vec<MemberId>,
    pub results: Vec<MemberId>,
    pub actions: BTreeMap<MemberId, Action>,
}

impl Session {
    /// Every result has exactly one action and there is at least one result.
    pub fn validate(&self) -> Result<()> {
        if self.results.is_empty() {
            return Err(Error::Invalid(format!("session {} has no results", self.session_id)));
        }
        let distinct: BTreeSet<MemberId> = self.results.iter().copied().collect();
        if distinct.len() != self.results.len() {
            return Err(Error::Invalid(format!("session {} repeats a result", self.session_id)));
        }
        if distinct.len() != self.actions.len() || !distinct.iter().all(|m| self.actions.contains_key(m)) {
            return Err(Error::Invalid(format!(
                "session {} actions do not match its results",
                self.session_id
            )));
        }
        if self.ideal_candidates.iter().any(|c| distinct.contains(c)) {
            return Err(Error::Invalid(format!(
                "session {} shows an ideal candidate",
                self.session_id
            )));
        }
        Ok(())
    }

    pub fn action(&self, m: MemberId) -> Option<Action> {
        self.actions.get(&m).copied()
    }

    /// Inmailed results in display order.
    pub fn inmailed(&self) -> Vec<MemberId> {
        self.results
            .iter()
            .copied()
            .filter(|m| self.action(*m) == Some(Action::Inmailed))
            .collect()
    }
}

pub fn save_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in sessions {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::parse("session", e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_sessions(path: &Path) -> Result<Vec<Session>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Session = serde_json::from_str(&line)
            .map_err(|e| Error::parse("session log", format!("line {}: {e}", i + 1)))?;
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Coinmail,
    RandomizedBucket,
    /// Keyword session graded as-is, with no ideal candidates.
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LabeledRow<T> {
    pub member_id: MemberId,
    pub grade: Grade,
    #[serde(default)]
    pub features: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LabeledList<T> {
    pub list_id: u64,
    pub session_id: u64,
    pub ideal_candidates: Vec<MemberId>,
    pub rows: Vec<LabeledRow<T>>,
    pub origin: Origin,
}

impl<T: Scalar> LabeledList<T> {
    pub fn grades(&self) -> Vec<Grade> {
        self.rows.iter().map(|r| r.grade).collect()
    }

    pub fn validate(&self, scheme: &GradeScheme) -> Result<()> {
        let ic_ok = match self.origin {
            Origin::Keyword => self.ideal_candidates.is_empty(),
            _ => (1..=MAX_IDEAL_CANDIDATES).contains(&self.ideal_candidates.len()),
        };
        if !ic_ok {
            return Err(Error::Invalid(format!(
                "list {} has {} ideal candidates",
                self.list_id,
                self.ideal_candidates.len()
            )));
        }
        if self.rows.iter().any(|r| self.ideal_candidates.contains(&r.member_id)) {
            return Err(Error::Invalid(format!("list {} grades an ideal candidate", self.list_id)));
        }
        if let Some(r) = self.rows.iter().find(|r| !scheme.allows(r.grade)) {
            return Err(Error::Invalid(format!("list {} has grade {}", self.list_id, r.grade.0)));
        }
        Ok(())
    }
}

/// Labeled lists sharing one feature registry. Rows may carry no features
/// until the lists are featurized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub registry: Registry,
    pub lists: Vec<LabeledList<T>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    registry: Registry,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(registry: Registry, lists: Vec<LabeledList<T>>) -> Self {
        Dataset { registry, lists }
    }

    /// Line-delimited: a header with the registry, then one list per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = DatasetHeader {
            registry: self.registry.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::parse("dataset", e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for l in &self.lists {
            serde_json::to_writer(&mut w, l).map_err(|e| Error::parse("dataset", e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or(Error::Empty("dataset file"))?
            .map_err(|e| Error::io(path, e))?;
        let header: DatasetHeader =
            serde_json::from_str(&header).map_err(|e| Error::parse("dataset header", e))?;
        let mut lists = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: LabeledList<T> = serde_json::from_str(&line)
                .map_err(|e| Error::parse("dataset", format!("line {}: {e}", i + 2)))?;
            if l.rows.iter().any(|r| !r.features.is_empty() && r.features.len() != header.registry.len()) {
                return Err(Error::RegistryMismatch(format!(
                    "list {} rows do not match the registry",
                    l.list_id
                )));
            }
            lists.push(l);
        }
        Ok(Dataset {
            registry: header.registry,
            lists,
        })
    }

    /// Keeps only lists of the given origins.
    pub fn filter_origin(&self, origins: &[Origin]) -> Self {
        Dataset {
            registry: self.registry.clone(),
            lists: self.lists.iter().filter(|l| origins.contains(&l.origin)).cloned().collect(),
        }
    }

    /// Projects every row onto a sub-registry.
    pub fn project(&self, target: &Registry) -> Result<Self> {
        let cols = self.registry.projection(target)?;
        let lists = self
            .lists
            .iter()
            .map(|l| LabeledList {
                rows: l
                    .rows
                    .iter()
                    .map(|r| LabeledRow {
                        member_id: r.member_id,
                        grade: r.grade,
                        features: cols.iter().map(|&c| r.features[c]).collect(),
                    })
                    .collect(),
                ..l.clone()
            })
            .collect();
        Ok(Dataset {
            registry: target.clone(),
            lists,
        })
    }
}

pub fn grade_of(action: Action, scheme: &GradeScheme) -> Grade {
    match action {
        Action::Inmailed => scheme.inmailed,
        Action::Clicked => scheme.clicked,
        Action::Skipped => scheme.skipped,
    }
}

fn graded_rows<T>(s: &Session, exclude: &[MemberId], scheme: &GradeScheme) -> Vec<LabeledRow<T>> {
    s.results
        .iter()
        .filter(|m| !exclude.contains(m))
        .map(|&m| LabeledRow {
            member_id: m,
            grade: grade_of(s.action(m).unwrap_or(Action::Skipped), scheme),
            features: Vec::new(),
        })
        .collect()
}

/// Co-inmail list with the given inmailed results as ideal candidates.
/// `None` if a candidate was not inmailed or no row would remain.
pub fn label_with_candidates<T>(
    s: &Session,
    ideal_candidates: &[MemberId],
    list_id: u64,
    scheme: &GradeScheme,
) -> Option<LabeledList<T>> {
    if ideal_candidates.is_empty()
        || ideal_candidates.len() > MAX_IDEAL_CANDIDATES
        || ideal_candidates.iter().any(|&c| s.action(c) != Some(Action::Inmailed))
    {
        return None;
    }
    let rows = graded_rows(s, ideal_candidates, scheme);
    if rows.is_empty() {
        return None;
    }
    Some(LabeledList {
        list_id,
        session_id: s.session_id,
        ideal_candidates: ideal_candidates.to_vec(),
        rows,
        origin: Origin::Coinmail,
    })
}

/// Picks `n_ic` inmailed results uniformly as ideal candidates and grades the
/// rest. `None` when the session has fewer than two inmails, when `n_ic` is
/// outside `1..=3` or exceeds the inmail count, or when nothing is left to
/// grade.
pub fn derive_coinmail_labels<T, R: Rng>(
    s: &Session,
    n_ic: usize,
    rng: &mut R,
) -> Option<LabeledList<T>> {
    let inmailed = s.inmailed();
    if inmailed.len() < 2 || n_ic == 0 || n_ic > MAX_IDEAL_CANDIDATES || n_ic > inmailed.len() {
        return None;
    }
    let ics: Vec<MemberId> = inmailed.choose_multiple(rng, n_ic).copied().collect();
    label_with_candidates(s, &ics, s.session_id, &GradeScheme::default())
}

/// Every shown result graded by action, with no ideal candidates.
pub fn derive_keyword_labels<T>(s: &Session, scheme: &GradeScheme) -> LabeledList<T> {
    LabeledList {
        list_id: s.session_id,
        session_id: s.session_id,
        ideal_candidates: Vec::new(),
        rows: graded_rows(s, &[], scheme),
        origin: Origin::Keyword,
    }
}

/// The session's own candidates and every shown result graded by action;
/// `None` for keyword sessions.
pub fn derive_randomized_labels<T>(s: &Session, scheme: &GradeScheme) -> Option<LabeledList<T>> {
    if s.kind != SessionKind::Example || s.ideal_candidates.is_empty() {
        return None;
    }
    Some(LabeledList {
        list_id: s.session_id,
        session_id: s.session_id,
        ideal_candidates: s.ideal_candidates.clone(),
        rows: graded_rows(s, &s.ideal_candidates, scheme),
        origin: Origin::RandomizedBucket,
    })
}

/// Uniform shuffle of the first `min(k, n)` items; the tail keeps its order.
pub fn randomize_top_k<I: Clone, R: Rng>(items: &[I], k: usize, rng: &mut R) -> Result<Vec<I>> {
    if k == 0 {
        return Err(Error::Invalid("shuffle depth must be at least 1".into()));
    }
    let mut out = items.to_vec();
    let head = k.min(out.len());
    out[..head].shuffle(rng);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub min_inmails: usize,
    pub min_ic: usize,
    pub max_ic: usize,
    pub lists_per_session: usize,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            min_inmails: 2,
            min_ic: 1,
            max_ic: 3,
            lists_per_session: 1,
            seed: 0,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_inmails < 2 {
            return Err(Error::Config("at least two inmails are needed per session".into()));
        }
        if self.min_ic == 0 || self.min_ic > self.max_ic || self.max_ic > MAX_IDEAL_CANDIDATES {
            return Err(Error::Config(format!(
                "ideal candidate range {}..={} not within 1..={MAX_IDEAL_CANDIDATES}",
                self.min_ic, self.max_ic
            )));
        }
        if self.lists_per_session == 0 {
            return Err(Error::Config("lists_per_session must be positive".into()));
        }
        Ok(())
    }
}

/// Co-inmail lists for every qualifying keyword session. The candidate count
/// is uniform over `min_ic..=min(max_ic, inmails - 1)`, so at least one
/// inmailed result is always left to grade.
pub fn make_coinmail_lists<T: Scalar>(sessions: &[Session], cfg: &LabelConfig) -> Result<Vec<LabeledList<T>>> {
    cfg.validate()?;
    let lists = sessions
        .par_iter()
        .filter(|s| s.kind == SessionKind::Keyword)
        .flat_map_iter(|s| {
            let mut rng = stream_rng(cfg.seed, s.session_id);
            let inmails = s.inmailed().len();
            let mut out = Vec::new();
            if inmails < cfg.min_inmails {
                return out;
            }
            let hi = cfg.max_ic.min(inmails - 1);
            if hi < cfg.min_ic {
                return out;
            }
            for draw in 0..cfg.lists_per_session {
                let n_ic = rng.random_range(cfg.min_ic..=hi);
                if let Some(mut l) = derive_coinmail_labels::<T, _>(s, n_ic, &mut rng) {
                    l.list_id = s.session_id * cfg.lists_per_session as u64 + draw as u64;
                    out.push(l);
                }
            }
            out
        })
        .collect();
    Ok(lists)
}

/// Session-level train/validation/test assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionSplit {
    assignment: HashMap<u64, Split>,
}

impl SessionSplit {
    /// Shuffles the distinct session ids with `seed` and cuts them by the
    /// train and validation fractions; the remainder is test.
    pub fn new(session_ids: impl IntoIterator<Item = u64>, train: f64, valid: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&valid) || train + valid > 1.0 + 1e-12 {
            return Err(Error::Config(format!("bad split fractions {train}/{valid}")));
        }
        let mut ids: Vec<u64> = session_ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n = ids.len() as f64;
        let n_train = (n * train).round() as usize;
        let n_valid = ((n * valid).round() as usize).min(ids.len() - n_train);
        let assignment = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| {
                let s = if i < n_train {
                    Split::Train
                } else if i < n_train + n_valid {
                    Split::Valid
                } else {
                    Split::Test
                };
                (id, s)
            })
            .collect();
        Ok(SessionSplit { assignment })
    }

    pub fn default_ratios(session_ids: impl IntoIterator<Item = u64>, seed: u64) -> Self {
        Self::new(session_ids, 0.7, 0.15, seed).expect("default ratios are valid")
    }

    pub fn get(&self, session_id: u64) -> Option<Split> {
        self.assignment.get(&session_id).copied()
    }

    /// Lists whose session falls in `split`.
    pub fn select<T: Clone>(&self, lists: &[LabeledList<T>], split: Split) -> Vec<LabeledList<T>> {
        lists
            .iter()
            .filter(|l| self.get(l.session_id) == Some(split))
            .cloned()
            .collect()
    }
}
