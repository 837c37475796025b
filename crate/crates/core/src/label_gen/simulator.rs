//! Synthetic search sessions.
//!
//! Each session starts from a hidden archetype profile (the position the
//! searcher is hiring for). The searcher issues a query, sees a shuffled
//! page of results and acts on each one with probabilities that rise with
//! the result's affinity to the archetype.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dictionaries, EntityKind, MemberId, MemberProfile};
use crate::expertise::ExpertiseMatrix;
use crate::features::{
    baseline_features, career_path_similarity, CareerPathConfig, NodeSimilarityModel, PreparedProfile,
    PreparedQuery, Priors, ProfileCache,
};
use crate::ltr::sort_ranked;
use crate::query_builder::{build_query, BuilderConfig, QueryContext, StructuredQuery};
use crate::retrieval::InvertedIndex;
use crate::synth::{stream_rng, SynthConfig, Synthesizer, Taxonomy};
use crate::text::StopWords;

use super::{randomize_top_k, Action, Session, SessionKind};

/// Weights of the production keyword ranker over the baseline features.
pub const KEYWORD_RANKER_WEIGHTS: [f64; 4] = [1.0, 1.0, 1.0, 1.0];

const DEFAULT_POPULARITY: f64 = 0.1;

/// Mix of the ground-truth affinity between a member and an archetype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityWeights {
    /// Fraction of the archetype's skills the member lists.
    pub skill: f64,
    /// Dictionary similarity of current titles.
    pub title: f64,
    /// Closeness of current seniority.
    pub seniority: f64,
    /// Career-path alignment with the archetype's positions.
    pub career: f64,
    /// The member's prior scaled by the largest prior. Historical
    /// engagement carries over to new searches.
    #[serde(default)]
    pub popularity: f64,
}

impl Default for AffinityWeights {
    fn default() -> Self {
        AffinityWeights {
            skill: 0.4,
            title: 0.25,
            seniority: 0.1,
            career: 0.25,
            popularity: DEFAULT_POPULARITY,
        }
    }
}

impl AffinityWeights {
    pub fn career_only() -> Self {
        AffinityWeights {
            skill: 0.0,
            title: 0.0,
            seniority: 0.0,
            career: 1.0,
            popularity: 0.0,
        }
    }

    fn total(&self) -> f64 {
        self.skill + self.title + self.seniority + self.career + self.popularity
    }
}

/// `scale / (1 + exp(-(a - midpoint) / temperature))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCurve {
    pub scale: f64,
    pub midpoint: f64,
    pub temperature: f64,
}

impl ActionCurve {
    pub fn probability(&self, affinity: f64) -> f64 {
        (self.scale / (1.0 + (-(affinity - self.midpoint) / self.temperature).exp())).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub keyword_sessions: usize,
    pub example_sessions: usize,
    pub seed: u64,
    pub page_size: usize,
    pub shuffle_k: usize,
    pub affinity: AffinityWeights,
    pub inmail: ActionCurve,
    /// Click probability for results that were not inmailed.
    pub click: ActionCurve,
    /// Example searches draw their candidates from this many of the
    /// highest-affinity members matching the archetype.
    pub candidate_pool: usize,
    pub max_attempts: usize,
    pub searchers: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            keyword_sessions: 1000,
            example_sessions: 300,
            seed: 0,
            page_size: 25,
            shuffle_k: 100,
            affinity: AffinityWeights::default(),
            inmail: ActionCurve {
                scale: 0.9,
                midpoint: 0.7,
                temperature: 0.05,
            },
            click: ActionCurve {
                scale: 0.7,
                midpoint: 0.5,
                temperature: 0.06,
            },
            candidate_pool: 10,
            max_attempts: 50,
            searchers: 200,
        }
    }
}

impl SimConfig {
    /// Affinity driven by career-path alignment alone.
    pub fn career_driven() -> Self {
        SimConfig {
            affinity: AffinityWeights::career_only(),
            inmail: ActionCurve {
                scale: 0.9,
                midpoint: 0.6,
                temperature: 0.04,
            },
            click: ActionCurve {
                scale: 0.7,
                midpoint: 0.4,
                temperature: 0.05,
            },
            ..Self::default()
        }
    }
}

/// Hidden hiring need.
#[derive(Debug, Clone)]
pub struct Archetype {
    pub profile: MemberProfile,
    pub prepared: PreparedProfile<f64>,
}

/// Shared read-only state of a simulation run.
pub struct Simulator<'a> {
    pub corpus: &'a Corpus,
    pub dicts: &'a Dictionaries,
    pub taxonomy: &'a Taxonomy,
    pub expertise: &'a ExpertiseMatrix<f64>,
    pub priors: &'a Priors,
    pub stopwords: &'a StopWords,
    pub index: &'a InvertedIndex,
    pub profiles: &'a ProfileCache<f64>,
    pub cfg: SimConfig,
    node_model: NodeSimilarityModel<f64>,
    career: CareerPathConfig<f64>,
    max_prior: f64,
}

impl<'a> Simulator<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        corpus: &'a Corpus,
        dicts: &'a Dictionaries,
        taxonomy: &'a Taxonomy,
        expertise: &'a ExpertiseMatrix<f64>,
        priors: &'a Priors,
        stopwords: &'a StopWords,
        index: &'a InvertedIndex,
        profiles: &'a ProfileCache<f64>,
        cfg: SimConfig,
    ) -> Self {
        Simulator {
            corpus,
            dicts,
            taxonomy,
            expertise,
            priors,
            stopwords,
            index,
            profiles,
            cfg,
            node_model: NodeSimilarityModel::default(),
            career: CareerPathConfig::default(),
            max_prior: priors.max(),
        }
    }

    pub fn archetype<R: Rng>(&self, rng: &mut R) -> Archetype {
        let synth = Synthesizer::new(
            self.dicts,
            self.taxonomy,
            SynthConfig {
                nonstandard_title_rate: 0.0,
                outlier_skill_rate: 0.0,
                missing_skill_rate: 0.0,
                ..SynthConfig::default()
            },
        );
        let profile = synth.profile(rng, 0);
        let prepared = PreparedProfile::new(&profile, self.dicts, self.stopwords);
        Archetype { profile, prepared }
    }

    /// Ground-truth affinity in [0, 1].
    pub fn affinity(&self, a: &Archetype, member: MemberId) -> f64 {
        let (Some(p), Some(prepared)) = (self.corpus.get(member), self.profiles.get(member)) else {
            return 0.0;
        };
        let w = &self.cfg.affinity;
        let mut score = 0.0;
        if w.skill > 0.0 {
            let need = &a.prepared.skills;
            let covered = need.iter().filter(|s| prepared.skills.binary_search(s).is_ok()).count();
            score += w.skill * covered as f64 / need.len().max(1) as f64;
        }
        if w.title > 0.0 {
            if let (Some(x), Some(y)) = (a.prepared.current_title_id, prepared.current_title_id) {
                score += w.title * self.dicts.title.similarity(x, y);
            }
        }
        if w.seniority > 0.0 {
            let sa = a.profile.current_position().map_or(0, |c| c.seniority);
            let sm = p.current_position().map_or(0, |c| c.seniority);
            let gap = (i32::from(sa) - i32::from(sm)).abs();
            score += w.seniority * (1.0 - f64::from(gap) / 9.0).max(0.0);
        }
        if w.career > 0.0 {
            score += w.career
                * career_path_similarity(
                    &a.prepared.positions,
                    &prepared.positions,
                    &self.node_model,
                    self.dicts,
                    &self.career,
                );
        }
        if w.popularity > 0.0 && self.max_prior > 0.0 {
            score += w.popularity * self.priors.get(member) / self.max_prior;
        }
        (score / w.total()).clamp(0.0, 1.0)
    }

    pub fn act<R: Rng>(&self, affinity: f64, rng: &mut R) -> Action {
        let u: f64 = rng.random();
        let p_inmail = self.cfg.inmail.probability(affinity);
        if u < p_inmail {
            return Action::Inmailed;
        }
        let p_click = self.cfg.click.probability(affinity);
        if u < p_inmail + (1.0 - p_inmail) * p_click {
            Action::Clicked
        } else {
            Action::Skipped
        }
    }

    /// Keyword query for an archetype: its title plus close titles, and two
    /// or three of its skills.
    pub fn keyword_query<R: Rng>(&self, a: &Archetype, rng: &mut R) -> (String, StructuredQuery<f64>) {
        let mut q = StructuredQuery::default();
        let mut text = Vec::new();
        if let Some(t) = a.prepared.current_title_id {
            let mut titles = vec![(t, 1.0)];
            titles.extend(
                self.dicts
                    .title
                    .similar(t)
                    .iter()
                    .filter(|(_, w)| *w >= 0.8)
                    .take(2)
                    .copied(),
            );
            q.set_facet(EntityKind::Title, titles);
            text.push(self.dicts.title.name(t).unwrap_or_default().to_owned());
        }
        let mut by_endorsement = a.profile.skills.clone();
        by_endorsement.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let top: Vec<u32> = by_endorsement.iter().take(5).map(|s| s.0).collect();
        let n = rng.random_range(2..=3).min(top.len());
        let skills: Vec<u32> = top.choose_multiple(rng, n).copied().collect();
        for &s in &skills {
            text.push(self.dicts.skill.name(s).unwrap_or_default().to_owned());
        }
        q.set_facet(EntityKind::Skill, skills.into_iter().map(|s| (s, 1.0)).collect());
        (text.join(" "), q)
    }

    /// Retrieves, orders by the keyword ranker and shuffles the top results.
    fn results_page<R: Rng>(&self, q: &StructuredQuery<f64>, exclude: &[MemberId], rng: &mut R) -> Vec<MemberId> {
        let Ok(hits) = self.index.retrieve(q) else {
            return Vec::new();
        };
        let pq = PreparedQuery::new(q, self.dicts, self.stopwords);
        let mut scored: Vec<(MemberId, f64)> = hits
            .into_iter()
            .filter(|m| !exclude.contains(m))
            .filter_map(|m| {
                let r = self.profiles.get(m)?;
                let f = baseline_features(&pq, r, self.expertise, self.priors);
                let w = KEYWORD_RANKER_WEIGHTS;
                let s = w[0] * f.skill_expertise + w[1] * f.text_match + w[2] * f.entity_title_match + w[3] * f.ctr_prior;
                Some((m, s))
            })
            .collect();
        sort_ranked(&mut scored);
        let ids: Vec<MemberId> = scored.into_iter().map(|(m, _)| m).collect();
        let mut page = randomize_top_k(&ids, self.cfg.shuffle_k.max(1), rng).expect("positive depth");
        page.truncate(self.cfg.page_size);
        page
    }

    fn observe<R: Rng>(&self, a: &Archetype, results: &[MemberId], rng: &mut R) -> BTreeMap<MemberId, Action> {
        results
            .iter()
            .map(|&m| (m, self.act(self.affinity(a, m), rng)))
            .collect()
    }

    pub fn keyword_session(&self, session_id: u64) -> Option<Session> {
        self.keyword_session_traced(session_id).map(|(_, s)| s)
    }

    /// A keyword session together with the hidden archetype behind it.
    pub fn keyword_session_traced(&self, session_id: u64) -> Option<(Archetype, Session)> {
        let mut rng = stream_rng(self.cfg.seed, session_id);
        for _ in 0..self.cfg.max_attempts {
            let a = self.archetype(&mut rng);
            let (text, q) = self.keyword_query(&a, &mut rng);
            let results = self.results_page(&q, &[], &mut rng);
            if results.is_empty() {
                continue;
            }
            let actions = self.observe(&a, &results, &mut rng);
            let session = Session {
                session_id,
                searcher_id: rng.random_range(1..=self.cfg.searchers.max(1)),
                kind: SessionKind::Keyword,
                keyword_query: text,
                query: q,
                ideal_candidates: Vec::new(),
                results,
                actions,
            };
            return Some((a, session));
        }
        None
    }

    /// An example search whose candidates are drawn from the members most
    /// similar to the archetype, with randomized results.
    pub fn example_session(&self, session_id: u64) -> Option<Session> {
        let mut rng = stream_rng(self.cfg.seed, session_id);
        for _ in 0..self.cfg.max_attempts {
            let a = self.archetype(&mut rng);
            let (text, kq) = self.keyword_query(&a, &mut rng);
            let Ok(pool) = self.index.retrieve(&kq) else {
                continue;
            };
            let mut pool: Vec<(MemberId, f64)> = pool.into_iter().map(|m| (m, self.affinity(&a, m))).collect();
            if pool.is_empty() {
                continue;
            }
            sort_ranked(&mut pool);
            pool.truncate(self.cfg.candidate_pool.max(1));
            let n_ic = rng.random_range(1..=3).min(pool.len());
            let ics: Vec<MemberId> = pool.choose_multiple(&mut rng, n_ic).map(|p| p.0).collect();
            let profiles: Vec<&MemberProfile> = ics.iter().filter_map(|&m| self.corpus.get(m)).collect();
            let ctx = QueryContext::new(profiles).ok()?;
            let q: StructuredQuery<f64> = build_query(&ctx, self.expertise, self.dicts, &BuilderConfig::default());
            let results = self.results_page(&q, &ics, &mut rng);
            if results.is_empty() {
                continue;
            }
            let actions = self.observe(&a, &results, &mut rng);
            return Some(Session {
                session_id,
                searcher_id: rng.random_range(1..=self.cfg.searchers.max(1)),
                kind: SessionKind::Example,
                keyword_query: text,
                query: q,
                ideal_candidates: ics,
                results,
                actions,
            });
        }
        None
    }

    /// Keyword sessions `0..keyword_sessions`, then example sessions with
    /// the following ids.
    pub fn simulate_sessions(&self) -> Vec<Session> {
        let k = self.cfg.keyword_sessions as u64;
        let e = self.cfg.example_sessions as u64;
        let mut out: Vec<Session> = (0..k).into_par_iter().filter_map(|i| self.keyword_session(i)).collect();
        out.extend((k..k + e).into_par_iter().filter_map(|i| self.example_session(i)).collect::<Vec<_>>());
        out
    }
}
