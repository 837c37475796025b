//! Keyword-era ranking features: skill expertise match, text match,
//! entity-aware title match and a static click-through prior.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dictionaries, EntityKind, MemberId};
use crate::error::{Error, Result};
use crate::expertise::ExpertiseMatrix;
use crate::query_builder::StructuredQuery;
use crate::scalar::Scalar;
use crate::text::StopWords;

use super::profile::PreparedProfile;

/// Query-independent click-through priors; unknown members get 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Priors {
    ctr: HashMap<MemberId, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorRecord {
    member_id: MemberId,
    ctr: f64,
}

impl Priors {
    pub fn new(ctr: impl IntoIterator<Item = (MemberId, f64)>) -> Result<Self> {
        let ctr: HashMap<MemberId, f64> = ctr.into_iter().collect();
        if let Some((m, v)) = ctr.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("prior {v} for member {m} outside [0, 1]")));
        }
        Ok(Priors { ctr })
    }

    pub fn get(&self, member: MemberId) -> f64 {
        self.ctr.get(&member).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.ctr.len()
    }

    /// Largest prior, or 0 when empty.
    pub fn max(&self) -> f64 {
        self.ctr.values().copied().fold(0.0, f64::max)
    }

    pub fn is_empty(&self) -> bool {
        self.ctr.is_empty()
    }

    /// CSV with a `member_id,ctr` header.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse("prior table", e))?;
        let mut rows = Vec::new();
        for rec in reader.deserialize::<PriorRecord>() {
            let rec = rec.map_err(|e| Error::parse("prior table", e))?;
            rows.push((rec.member_id, rec.ctr));
        }
        Priors::new(rows)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse("prior table", e))?;
        let mut rows: Vec<_> = self.ctr.iter().collect();
        rows.sort_by_key(|r| *r.0);
        for (&member_id, &ctr) in rows {
            w.serialize(PriorRecord { member_id, ctr })
                .map_err(|e| Error::parse("prior table", e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineFeatures<T> {
    pub skill_expertise: T,
    pub text_match: T,
    pub entity_title_match: T,
    pub ctr_prior: T,
}

/// Query-side data shared by all results of one query.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    pub skills: Vec<u32>,
    pub titles: Vec<u32>,
    /// Distinct content tokens of every facet entity name.
    pub tokens: Vec<String>,
}

impl PreparedQuery {
    pub fn new<T: Scalar>(q: &StructuredQuery<T>, dicts: &Dictionaries, stopwords: &StopWords) -> Self {
        let mut tokens = Vec::new();
        for kind in EntityKind::ALL {
            for id in q.ids(kind) {
                if let Some(name) = dicts.get(kind).name(id) {
                    tokens.extend(stopwords.content_tokens(name));
                }
            }
        }
        tokens.sort_unstable();
        tokens.dedup();
        PreparedQuery {
            skills: q.ids(EntityKind::Skill).collect(),
            titles: q.ids(EntityKind::Title).collect(),
            tokens,
        }
    }
}

pub fn baseline_features<T: Scalar>(
    q: &PreparedQuery,
    r: &PreparedProfile<T>,
    expertise: &ExpertiseMatrix<T>,
    priors: &Priors,
) -> BaselineFeatures<T> {
    let skill_expertise = q
        .skills
        .iter()
        .map(|&s| expertise.expertise_score(r.member_id, s))
        .sum();
    let text_match = if q.tokens.is_empty() {
        T::zero()
    } else {
        let hits = q.tokens.iter().filter(|t| r.text_tokens.contains(*t)).count();
        T::of(hits as f64 / q.tokens.len() as f64)
    };
    let entity_title_match = match r.current_title_id {
        Some(t) if q.titles.contains(&t) => T::one(),
        _ => T::zero(),
    };
    BaselineFeatures {
        skill_expertise,
        text_match,
        entity_title_match,
        ctr_prior: T::of(priors.get(r.member_id)),
    }
}
