//! Per-profile precomputation reused by every feature evaluation.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::corpus::{Corpus, Dictionaries, MemberId, MemberProfile, Position};
use crate::scalar::Scalar;
use crate::text::StopWords;

/// Sparse term-count vector sorted by term.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermVector<T> {
    pub terms: Vec<(String, T)>,
    pub norm: T,
}

impl<T: Scalar> TermVector<T> {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        let mut terms: Vec<(String, T)> = counts
            .into_iter()
            .map(|(t, c)| (t, T::of(c as f64)))
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let norm = terms.iter().map(|&(_, c)| c * c).sum::<T>().sqrt();
        TermVector { terms, norm }
    }

    /// Zero when either vector is empty.
    pub fn cosine(&self, other: &Self) -> T {
        if self.norm == T::zero() || other.norm == T::zero() {
            return T::zero();
        }
        let (a, b) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        let mut dot = T::zero();
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        (dot / (self.norm * other.norm)).clamp01()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPosition<T> {
    pub title_id: Option<u32>,
    pub company_id: Option<u32>,
    pub industry_id: Option<u32>,
    /// Stop-worded raw-title word set, sorted.
    pub title_words: Vec<String>,
    pub description: TermVector<T>,
    pub seniority: u8,
}

impl<T: Scalar> PreparedPosition<T> {
    pub fn new(p: &Position, dicts: &Dictionaries, stopwords: &StopWords) -> Self {
        PreparedPosition {
            title_id: p.title_id,
            company_id: p.company_id,
            industry_id: p
                .industry_id
                .or_else(|| p.company_id.and_then(|c| dicts.company_industry(c))),
            title_words: stopwords.word_set(&p.raw_title),
            description: TermVector::from_tokens(stopwords.content_tokens(&p.description)),
            seniority: p.seniority,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedProfile<T> {
    pub member_id: MemberId,
    /// Explicit skill ids, sorted.
    pub skills: Vec<u32>,
    pub current_title_id: Option<u32>,
    pub current_title_words: Vec<String>,
    pub positions: Vec<PreparedPosition<T>>,
    /// Every content token of the profile: headline, titles, descriptions
    /// and the names of the profile's skills, companies and industries.
    pub text_tokens: HashSet<String>,
}

impl<T: Scalar> PreparedProfile<T> {
    pub fn new(p: &MemberProfile, dicts: &Dictionaries, stopwords: &StopWords) -> Self {
        let mut skills: Vec<u32> = p.skill_ids().collect();
        skills.sort_unstable();
        skills.dedup();
        let current = p.current_position();
        let mut text_tokens: HashSet<String> = stopwords.content_tokens(&p.headline).into_iter().collect();
        for pos in &p.positions {
            text_tokens.extend(stopwords.content_tokens(&pos.raw_title));
            text_tokens.extend(stopwords.content_tokens(&pos.description));
        }
        for e in p.entities() {
            if let Some(name) = dicts.name(e) {
                text_tokens.extend(stopwords.content_tokens(name));
            }
        }
        PreparedProfile {
            member_id: p.member_id,
            skills,
            current_title_id: current.and_then(|c| c.title_id),
            current_title_words: current
                .map(|c| stopwords.word_set(&c.raw_title))
                .unwrap_or_default(),
            positions: p
                .positions
                .iter()
                .map(|pos| PreparedPosition::new(pos, dicts, stopwords))
                .collect(),
            text_tokens,
        }
    }
}

/// Prepared profiles for a whole corpus.
#[derive(Debug, Clone, Default)]
pub struct ProfileCache<T> {
    profiles: HashMap<MemberId, PreparedProfile<T>>,
}

impl<T: Scalar> ProfileCache<T> {
    pub fn build(corpus: &Corpus, dicts: &Dictionaries, stopwords: &StopWords) -> Self {
        let profiles = corpus
            .profiles()
            .par_iter()
            .map(|p| (p.member_id, PreparedProfile::new(p, dicts, stopwords)))
            .collect();
        ProfileCache { profiles }
    }

    pub fn get(&self, id: MemberId) -> Option<&PreparedProfile<T>> {
        self.profiles.get(&id)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}
