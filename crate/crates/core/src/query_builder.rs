//! Structured query generation from ideal candidates, and searcher edits.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dictionaries, EntityKind, MemberId, MemberProfile};
use crate::error::{Error, Result};
use crate::expertise::ExpertiseMatrix;
use crate::scalar::{desc, Scalar};

pub const MAX_IDEAL_CANDIDATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacetEntry<T> {
    pub id: u32,
    pub score: T,
}

/// Conjunction across non-empty facets, disjunction within a facet.
///
/// Entries within a facet are unique and ordered by non-increasing score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StructuredQuery<T> {
    pub facets: BTreeMap<EntityKind, Vec<FacetEntry<T>>>,
}

impl<T: Scalar> Default for StructuredQuery<T> {
    fn default() -> Self {
        StructuredQuery {
            facets: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> StructuredQuery<T> {
    pub fn facet(&self, kind: EntityKind) -> &[FacetEntry<T>] {
        self.facets.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ids(&self, kind: EntityKind) -> impl Iterator<Item = u32> + '_ {
        self.facet(kind).iter().map(|e| e.id)
    }

    pub fn contains(&self, kind: EntityKind, id: u32) -> bool {
        self.facet(kind).iter().any(|e| e.id == id)
    }

    pub fn is_unconstrained(&self) -> bool {
        self.facets.values().all(Vec::is_empty)
    }

    /// Sets a facet from `(id, score)` pairs, sorting by score descending
    /// then id ascending and keeping the first occurrence of each id. An
    /// empty facet is not stored.
    pub fn set_facet(&mut self, kind: EntityKind, mut entries: Vec<(u32, T)>) {
        if entries.is_empty() {
            self.facets.remove(&kind);
            return;
        }
        entries.sort_by(|a, b| desc(a.1, b.1).then(a.0.cmp(&b.0)));
        let mut seen = HashSet::new();
        entries.retain(|e| seen.insert(e.0));
        self.facets.insert(
            kind,
            entries.into_iter().map(|(id, score)| FacetEntry { id, score }).collect(),
        );
    }

    /// Facet ids are unique and scores non-increasing.
    pub fn is_well_formed(&self) -> bool {
        self.facets.values().all(|f| {
            let mut seen = HashSet::new();
            f.iter().all(|e| seen.insert(e.id) && e.score.is_finite())
                && f.windows(2).all(|w| w[0].score >= w[1].score)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("query serializes")
    }
}

/// The ideal candidates behind a search.
#[derive(Debug, Clone)]
pub struct QueryContext<'a> {
    pub ideal_candidates: Vec<&'a MemberProfile>,
    pub searcher_id: Option<MemberId>,
}

impl<'a> QueryContext<'a> {
    /// Requires one to three candidates.
    pub fn new(ideal_candidates: Vec<&'a MemberProfile>) -> Result<Self> {
        if ideal_candidates.is_empty() || ideal_candidates.len() > MAX_IDEAL_CANDIDATES {
            return Err(Error::Invalid(format!(
                "expected 1..={MAX_IDEAL_CANDIDATES} ideal candidates, got {}",
                ideal_candidates.len()
            )));
        }
        Ok(Self::for_refresh(ideal_candidates))
    }

    /// Allows an empty candidate list, used when re-ranking an edited query.
    pub fn for_refresh(ideal_candidates: Vec<&'a MemberProfile>) -> Self {
        QueryContext {
            ideal_candidates,
            searcher_id: None,
        }
    }

    pub fn ids(&self) -> Vec<MemberId> {
        self.ideal_candidates.iter().map(|p| p.member_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuilderConfig {
    pub skills: usize,
    pub titles: usize,
    pub companies: usize,
    pub industries: usize,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            skills: 10,
            titles: 3,
            companies: 10,
            industries: 3,
        }
    }
}

impl BuilderConfig {
    pub fn cap(&self, kind: EntityKind) -> usize {
        match kind {
            EntityKind::Skill => self.skills,
            EntityKind::Title => self.titles,
            EntityKind::Company => self.companies,
            EntityKind::Industry => self.industries,
        }
    }
}

fn sorted_desc<T: Scalar>(scores: HashMap<u32, T>) -> Vec<(u32, T)> {
    let mut out: Vec<(u32, T)> = scores.into_iter().collect();
    out.sort_by(|a, b| desc(a.1, b.1).then(a.0.cmp(&b.0)));
    out
}

/// Ranks skills by the sum of the candidates' expertise scores, dropping
/// zero-score skills. Ties go to the smaller skill id.
pub fn rank_skills<T: Scalar>(
    ideal_candidates: &[&MemberProfile],
    expertise: &ExpertiseMatrix<T>,
) -> Vec<(u32, T)> {
    let mut scores: HashMap<u32, T> = HashMap::new();
    for c in ideal_candidates {
        for &(skill, v) in expertise.row(c.member_id) {
            *scores.entry(skill).or_insert_with(T::zero) += v;
        }
    }
    scores.retain(|_, v| *v > T::zero());
    sorted_desc(scores)
}

/// Sums, over candidates, 1 for each directly held entity and the best
/// dictionary similarity from the candidate's entities for the others.
fn expand<T: Scalar>(
    per_candidate: &[Vec<u32>],
    similar: impl Fn(u32) -> Vec<(u32, f64)>,
) -> HashMap<u32, T> {
    let mut scores: HashMap<u32, T> = HashMap::new();
    for held in per_candidate {
        let mut best: HashMap<u32, f64> = HashMap::new();
        for &id in held {
            best.insert(id, 1.0);
        }
        for &id in held {
            for (other, w) in similar(id) {
                let slot = best.entry(other).or_insert(0.0);
                *slot = slot.max(w);
            }
        }
        for (id, w) in best {
            *scores.entry(id).or_insert_with(T::zero) += T::of(w);
        }
    }
    scores
}

/// Builds the facet query for a set of ideal candidates.
///
/// Skills come from [`rank_skills`]; titles, companies and industries are
/// aggregated over the candidates and expanded with dictionary neighbours
/// before the per-facet cut-off. Candidates without a standardized current
/// title yield an empty title facet, which retrieval then ignores.
pub fn build_query<T: Scalar>(
    ctx: &QueryContext<'_>,
    expertise: &ExpertiseMatrix<T>,
    dicts: &Dictionaries,
    cfg: &BuilderConfig,
) -> StructuredQuery<T> {
    let ics = &ctx.ideal_candidates;
    let mut q = StructuredQuery::default();

    let mut skills = rank_skills(ics, expertise);
    skills.truncate(cfg.skills);
    q.set_facet(EntityKind::Skill, skills);

    let titles: Vec<Vec<u32>> = ics
        .iter()
        .map(|c| c.current_position().and_then(|p| p.title_id).into_iter().collect())
        .collect();
    let mut title_scores = sorted_desc(expand::<T>(&titles, |id| dicts.title.similar(id).to_vec()));
    title_scores.truncate(cfg.titles);
    q.set_facet(EntityKind::Title, title_scores);

    let companies: Vec<Vec<u32>> = ics
        .iter()
        .map(|c| {
            let mut ids: Vec<u32> = c.positions.iter().filter_map(|p| p.company_id).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    let mut company_scores =
        sorted_desc(expand::<T>(&companies, |id| dicts.company.similar(id).to_vec()));
    company_scores.truncate(cfg.companies);

    let mut industry_scores: HashMap<u32, T> = HashMap::new();
    for &(company, score) in &company_scores {
        if let Some(ind) = dicts.company_industry(company) {
            *industry_scores.entry(ind).or_insert_with(T::zero) += score;
        }
    }
    // Fall back to the positions' own industry ids for unknown companies.
    if industry_scores.is_empty() {
        for c in ics.iter() {
            for p in &c.positions {
                if let Some(ind) = p.industry_id {
                    *industry_scores.entry(ind).or_insert_with(T::zero) += T::one();
                }
            }
        }
    }
    let mut industry_scores = sorted_desc(industry_scores);
    industry_scores.truncate(cfg.industries);

    q.set_facet(EntityKind::Company, company_scores);
    q.set_facet(EntityKind::Industry, industry_scores);
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEdit {
    pub action: EditAction,
    pub facet: EntityKind,
    pub entity: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditStatus {
    Applied,
    /// The added entity was already present; the query is unchanged.
    Duplicate,
}

/// Applies an edit and returns the new query; `q` is left untouched.
///
/// Added entities get score 1 and are placed ahead of existing entries with
/// score <= 1.
pub fn apply_edit<T: Scalar>(
    q: &StructuredQuery<T>,
    edit: &QueryEdit,
) -> Result<(StructuredQuery<T>, EditStatus)> {
    let mut out = q.clone();
    match edit.action {
        EditAction::Add => {
            if q.contains(edit.facet, edit.entity) {
                return Ok((out, EditStatus::Duplicate));
            }
            let facet = out.facets.entry(edit.facet).or_default();
            let at = facet.iter().position(|e| e.score <= T::one()).unwrap_or(facet.len());
            facet.insert(
                at,
                FacetEntry {
                    id: edit.entity,
                    score: T::one(),
                },
            );
        }
        EditAction::Remove => {
            let facet = out.facets.get_mut(&edit.facet);
            let Some(facet) = facet.filter(|f| f.iter().any(|e| e.id == edit.entity)) else {
                return Err(Error::NotInFacet {
                    kind: edit.facet,
                    id: edit.entity,
                });
            };
            facet.retain(|e| e.id != edit.entity);
            if facet.is_empty() {
                out.facets.remove(&edit.facet);
            }
        }
    }
    Ok((out, EditStatus::Applied))
}

pub const MAX_SUGGESTIONS: usize = 5;

/// Dictionary neighbours of the facet's current entities that are not yet
/// in the facet, ranked by summed similarity weight.
pub fn suggest_facet_values<T: Scalar>(
    q: &StructuredQuery<T>,
    facet: EntityKind,
    dicts: &Dictionaries,
) -> Vec<u32> {
    let present: HashSet<u32> = q.ids(facet).collect();
    let dict = dicts.get(facet);
    let mut weights: HashMap<u32, f64> = HashMap::new();
    for &id in &present {
        for &(other, w) in dict.similar(id) {
            if !present.contains(&other) {
                *weights.entry(other).or_insert(0.0) += w;
            }
        }
    }
    let mut ranked: Vec<(u32, f64)> = weights.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(MAX_SUGGESTIONS).map(|(id, _)| id).collect()
}
