//! Request and response types, and the handlers behind every route.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qbe_core::corpus::{EntityId, EntityKind, MemberId, MemberProfile, YearMonth};
use qbe_core::ltr::sort_ranked;
use qbe_core::query_builder::{
    apply_edit, build_query, suggest_facet_values, QueryContext, QueryEdit, StructuredQuery, MAX_IDEAL_CANDIDATES,
};

use crate::error::ServiceError;
use crate::snapshot::Snapshot;

pub const DEFAULT_PAGE_SIZE: usize = 25;
pub const MAX_PAGE_SIZE: usize = 500;
pub const DEFAULT_MEMBER_MATCHES: usize = 10;
pub const MAX_MEMBER_MATCHES: usize = 100;

type Result<T> = std::result::Result<T, ServiceError>;

fn default_limit() -> usize {
    DEFAULT_PAGE_SIZE
}

/// Offset and limit into the ranked result list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    #[serde(default)]
    pub offset: usize,
    #[serde(default = "default_limit")]
    pub limit: usize,
}

impl Default for Page {
    fn default() -> Self {
        Page {
            offset: 0,
            limit: DEFAULT_PAGE_SIZE,
        }
    }
}

impl Page {
    fn validate(&self) -> Result<()> {
        if self.limit > MAX_PAGE_SIZE {
            return Err(ServiceError::Validation(format!(
                "limit {} exceeds {MAX_PAGE_SIZE}",
                self.limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub ideal_candidate_ids: Vec<MemberId>,
    #[serde(flatten)]
    pub page: Page,
}

/// Re-ranks an edited query. `edit`, when present, is applied to `query`
/// first and the resulting query is returned in the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshRequest {
    pub query: StructuredQuery<f64>,
    #[serde(default)]
    pub ideal_candidate_ids: Vec<MemberId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit: Option<QueryEdit>,
    #[serde(flatten)]
    pub page: Page,
}

/// A named dictionary entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub facet: EntityKind,
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub member_id: MemberId,
    pub score: f64,
    pub name: String,
    pub headline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_title: Option<String>,
    /// Query entities this member holds, in query order.
    pub matched: Vec<NamedEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: StructuredQuery<f64>,
    /// Ordered by descending score, ties by ascending member id.
    pub results: Vec<ResultRow>,
    /// Matching members before paging, ideal candidates excluded.
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub snapshot_version: String,
    /// Some ideal candidate has a title outside the title dictionary and the
    /// query carries no title constraint.
    pub title_facet_dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub facet: EntityKind,
    pub suggestions: Vec<NamedEntity>,
    pub snapshot_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub member_id: MemberId,
    pub name: String,
    pub headline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionView {
    pub title: String,
    pub title_id: Option<u32>,
    pub company: Option<String>,
    pub industry: Option<String>,
    pub start: YearMonth,
    pub end: Option<YearMonth>,
    pub seniority: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberView {
    pub member_id: MemberId,
    pub name: String,
    pub headline: String,
    pub location: Option<String>,
    pub skills: Vec<NamedEntity>,
    pub positions: Vec<PositionView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub snapshot_version: String,
    pub members: usize,
    pub model_features: Vec<String>,
}

fn members<'a>(snap: &'a Snapshot, ids: &[MemberId]) -> Result<Vec<&'a MemberProfile>> {
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|&&m| !seen.insert(m)) {
        return Err(ServiceError::Validation(format!("ideal candidate {dup} given twice")));
    }
    ids.iter()
        .map(|&m| {
            snap.world
                .corpus
                .get(m)
                .ok_or_else(|| ServiceError::NotFound(format!("unknown member {m}")))
        })
        .collect()
}

/// Builds a query from one to three ideal candidates and ranks its results.
pub fn handle_search(snap: &Snapshot, req: &SearchRequest) -> Result<SearchResponse> {
    req.page.validate()?;
    let n = req.ideal_candidate_ids.len();
    if n == 0 || n > MAX_IDEAL_CANDIDATES {
        return Err(ServiceError::Validation(format!(
            "expected 1..={MAX_IDEAL_CANDIDATES} ideal candidates, got {n}"
        )));
    }
    let ics = members(snap, &req.ideal_candidate_ids)?;
    let ctx = QueryContext::new(ics.clone())?;
    let query = build_query(&ctx, &snap.world.expertise, &snap.world.dicts, &snap.builder);
    respond(snap, query, &ics, req.page)
}

/// Ranks an edited query, keeping the original candidates as similarity
/// context. The candidate list may be empty.
pub fn handle_refresh(snap: &Snapshot, req: &RefreshRequest) -> Result<SearchResponse> {
    req.page.validate()?;
    if req.ideal_candidate_ids.len() > MAX_IDEAL_CANDIDATES {
        return Err(ServiceError::Validation(format!(
            "at most {MAX_IDEAL_CANDIDATES} ideal candidates, got {}",
            req.ideal_candidate_ids.len()
        )));
    }
    let ics = members(snap, &req.ideal_candidate_ids)?;
    let mut query = normalize_query(snap, &req.query)?;
    if let Some(edit) = &req.edit {
        check_entity(snap, edit.facet, edit.entity)?;
        query = apply_edit(&query, edit)?.0;
    }
    if query.is_unconstrained() {
        return Err(qbe_core::Error::UnconstrainedQuery.into());
    }
    respond(snap, query, &ics, req.page)
}

/// Up to five dictionary neighbours of the facet's current values.
pub fn handle_suggest(snap: &Snapshot, query: &StructuredQuery<f64>, facet: &str) -> Result<SuggestResponse> {
    let kind: EntityKind = facet.parse()?;
    let query = normalize_query(snap, query)?;
    let suggestions = suggest_facet_values(&query, kind, &snap.world.dicts)
        .into_iter()
        .map(|id| named(snap, kind, id))
        .collect();
    Ok(SuggestResponse {
        facet: kind,
        suggestions,
        snapshot_version: snap.version.clone(),
    })
}

pub fn handle_member(snap: &Snapshot, id: MemberId) -> Result<MemberView> {
    let p = snap
        .world
        .corpus
        .get(id)
        .ok_or_else(|| ServiceError::NotFound(format!("unknown member {id}")))?;
    let d = &snap.world.dicts;
    let name_of = |kind: EntityKind, id: Option<u32>| id.and_then(|id| d.get(kind).name(id)).map(str::to_string);
    Ok(MemberView {
        member_id: p.member_id,
        name: p.name.clone(),
        headline: p.headline.clone(),
        location: p.location.clone(),
        skills: p.skill_ids().map(|s| named(snap, EntityKind::Skill, s)).collect(),
        positions: p
            .positions
            .iter()
            .map(|pos| PositionView {
                title: pos.raw_title.clone(),
                title_id: pos.title_id,
                company: name_of(EntityKind::Company, pos.company_id),
                industry: name_of(EntityKind::Industry, pos.industry_id),
                start: pos.start,
                end: pos.end,
                seniority: pos.seniority,
            })
            .collect(),
    })
}

/// Members whose name contains `needle`, case-insensitively, in corpus order.
pub fn handle_member_search(snap: &Snapshot, needle: &str, limit: Option<usize>) -> Result<Vec<MemberSummary>> {
    let limit = limit.unwrap_or(DEFAULT_MEMBER_MATCHES);
    if limit > MAX_MEMBER_MATCHES {
        return Err(ServiceError::Validation(format!(
            "limit {limit} exceeds {MAX_MEMBER_MATCHES}"
        )));
    }
    Ok(snap
        .world
        .corpus
        .search_by_name(needle, limit)
        .into_iter()
        .map(|p| MemberSummary {
            member_id: p.member_id,
            name: p.name.clone(),
            headline: p.headline.clone(),
            current_title: p.current_position().map(|c| c.raw_title.clone()),
        })
        .collect())
}

pub fn handle_health(snap: &Snapshot) -> HealthResponse {
    HealthResponse {
        status: "ok".into(),
        snapshot_version: snap.version.clone(),
        members: snap.world.corpus.len(),
        model_features: snap.model.registry.names().to_vec(),
    }
}

fn named(snap: &Snapshot, facet: EntityKind, id: u32) -> NamedEntity {
    let name = snap.world.dicts.get(facet).name(id).unwrap_or_default().to_string();
    NamedEntity { facet, id, name }
}

fn check_entity(snap: &Snapshot, facet: EntityKind, id: u32) -> Result<()> {
    if snap.world.dicts.get(facet).entity(id).is_none() {
        return Err(ServiceError::Validation(format!("unknown {facet} id {id}")));
    }
    Ok(())
}

/// Re-sorts client-supplied facets and rejects unknown ids or non-finite scores.
fn normalize_query(snap: &Snapshot, q: &StructuredQuery<f64>) -> Result<StructuredQuery<f64>> {
    let mut out = StructuredQuery::default();
    for (&kind, entries) in &q.facets {
        for e in entries {
            check_entity(snap, kind, e.id)?;
            if !e.score.is_finite() {
                return Err(ServiceError::Validation(format!("non-finite score for {kind} {}", e.id)));
            }
        }
        out.set_facet(kind, entries.iter().map(|e| (e.id, e.score)).collect());
    }
    Ok(out)
}

fn respond(
    snap: &Snapshot,
    query: StructuredQuery<f64>,
    ics: &[&MemberProfile],
    page: Page,
) -> Result<SearchResponse> {
    let world = &snap.world;
    let ic_ids: HashSet<MemberId> = ics.iter().map(|p| p.member_id).collect();
    let hits = world.index.retrieve(&query)?;
    let prepared = ics
        .iter()
        .map(|p| {
            world
                .profiles
                .get(p.member_id)
                .ok_or(qbe_core::Error::UnknownMember(p.member_id))
        })
        .collect::<qbe_core::Result<Vec<_>>>()?;
    let ctx = world.feature_context();
    let ex = ctx.extractor(prepared, &query);
    let mut scored = hits
        .par_iter()
        .filter(|m| !ic_ids.contains(m))
        .map(|&m| {
            let r = world.profiles.get(m).ok_or(qbe_core::Error::UnknownMember(m))?;
            Ok((m, snap.score(&ex.values(r))))
        })
        .collect::<qbe_core::Result<Vec<_>>>()?;
    sort_ranked(&mut scored);
    let total = scored.len();
    let results = scored
        .iter()
        .skip(page.offset)
        .take(page.limit)
        .map(|&(m, score)| row(snap, &query, m, score))
        .collect::<Result<Vec<_>>>()?;
    Ok(SearchResponse {
        title_facet_dropped: query.facet(EntityKind::Title).is_empty()
            && ics
                .iter()
                .flat_map(|p| &p.positions)
                .any(|pos| pos.title_id.is_none() && !pos.raw_title.trim().is_empty()),
        query,
        results,
        total,
        offset: page.offset,
        limit: page.limit,
        snapshot_version: snap.version.clone(),
    })
}

fn row(snap: &Snapshot, query: &StructuredQuery<f64>, m: MemberId, score: f64) -> Result<ResultRow> {
    let p = snap
        .world
        .corpus
        .get(m)
        .ok_or_else(|| ServiceError::Internal(format!("indexed member {m} missing from corpus")))?;
    let held = p.entities();
    let matched = query
        .facets
        .iter()
        .flat_map(|(&kind, entries)| entries.iter().map(move |e| (kind, e.id)))
        .filter(|&(kind, id)| held.binary_search(&EntityId { kind, id }).is_ok())
        .map(|(kind, id)| named(snap, kind, id))
        .collect();
    Ok(ResultRow {
        member_id: m,
        score,
        name: p.name.clone(),
        headline: p.headline.clone(),
        current_title: p.current_position().map(|c| c.raw_title.clone()),
        matched,
    })
}
