//! Inverted index over standardized profile attributes.

use std::collections::HashMap;

use crate::corpus::{Corpus, EntityKind, MemberId};
use crate::error::{Error, Result};
use crate::query_builder::StructuredQuery;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    postings: HashMap<(EntityKind, u32), Vec<MemberId>>,
    doc_count: usize,
}

impl InvertedIndex {
    /// Posts every member under its explicit skills and under the title,
    /// company and industry of every position it has held.
    pub fn build(corpus: &Corpus) -> Self {
        let mut postings: HashMap<(EntityKind, u32), Vec<MemberId>> = HashMap::new();
        for p in corpus.profiles() {
            for e in p.entities() {
                postings.entry((e.kind, e.id)).or_default().push(p.member_id);
            }
        }
        for list in postings.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        InvertedIndex {
            postings,
            doc_count: corpus.len(),
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn postings(&self, kind: EntityKind, id: u32) -> &[MemberId] {
        self.postings.get(&(kind, id)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    fn facet_union(&self, kind: EntityKind, ids: impl Iterator<Item = u32>) -> Vec<MemberId> {
        let mut out: Vec<MemberId> = ids.flat_map(|id| self.postings(kind, id)).copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Members matching at least one entity of every non-empty facet, in
    /// ascending id order.
    pub fn retrieve<T: Scalar>(&self, q: &StructuredQuery<T>) -> Result<Vec<MemberId>> {
        let mut unions: Vec<Vec<MemberId>> = q
            .facets
            .iter()
            .filter(|(_, entries)| !entries.is_empty())
            .map(|(&kind, entries)| self.facet_union(kind, entries.iter().map(|e| e.id)))
            .collect();
        if unions.is_empty() {
            return Err(Error::UnconstrainedQuery);
        }
        unions.sort_by_key(Vec::len);
        let mut result = unions.swap_remove(0);
        for other in &unions {
            if result.is_empty() {
                break;
            }
            result = intersect(&result, other);
        }
        Ok(result)
    }
}

fn intersect(a: &[MemberId], b: &[MemberId]) -> Vec<MemberId> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
