//! Slow, obviously-correct reference implementations.

use qbe_core::corpus::{EntityId, MemberProfile};
use qbe_core::corpus::Dictionaries;
use qbe_core::features::{node_similarity_prepared, CareerPathConfig, NodeSimilarityModel, PreparedPosition};
use qbe_core::query_builder::StructuredQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Pair,
    SkipLeft,
    SkipRight,
}

/// Every global alignment of sequences of length `n` and `m`, as step lists.
pub fn all_alignments(n: usize, m: usize) -> Vec<Vec<Step>> {
    fn walk(i: usize, j: usize, n: usize, m: usize, path: &mut Vec<Step>, out: &mut Vec<Vec<Step>>) {
        if i == n && j == m {
            out.push(path.clone());
            return;
        }
        let moves = [
            (Step::Pair, i < n && j < m, 1, 1),
            (Step::SkipLeft, i < n, 1, 0),
            (Step::SkipRight, j < m, 0, 1),
        ];
        for (step, allowed, di, dj) in moves {
            if allowed {
                path.push(step);
                walk(i + di, j + dj, n, m, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Score of one alignment: paired similarities plus `gap` per skipped element.
pub fn alignment_score(steps: &[Step], sim: &[Vec<f64>], gap: f64) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    for s in steps {
        match s {
            Step::Pair => {
                total += sim[i][j];
                i += 1;
                j += 1;
            }
            Step::SkipLeft => {
                total += gap;
                i += 1;
            }
            Step::SkipRight => {
                total += gap;
                j += 1;
            }
        }
    }
    total
}

/// Best score over all alignments.
pub fn best_alignment(sim: &[Vec<f64>], n: usize, m: usize, gap: f64) -> f64 {
    all_alignments(n, m)
        .iter()
        .map(|a| alignment_score(a, sim, gap))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Career-path similarity by enumerating every alignment.
pub fn career_path_by_enumeration(
    p: &[PreparedPosition<f64>],
    q: &[PreparedPosition<f64>],
    model: &NodeSimilarityModel<f64>,
    dicts: &Dictionaries,
    cfg: &CareerPathConfig<f64>,
) -> f64 {
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    let sim: Vec<Vec<f64>> = p
        .iter()
        .map(|a| q.iter().map(|b| node_similarity_prepared(a, b, model, dicts)).collect())
        .collect();
    let best = best_alignment(&sim, p.len(), q.len(), cfg.gap_penalty);
    if cfg.normalize {
        (best / p.len().max(q.len()) as f64).clamp(0.0, 1.0)
    } else {
        best
    }
}

fn dcg(grades: &[u8], k: usize) -> f64 {
    let mut total = 0.0;
    for (i, &g) in grades.iter().enumerate().take(k) {
        total += (2f64.powi(i32::from(g)) - 1.0) / ((i + 2) as f64).log2();
    }
    total
}

/// NDCG@k with gain `2^g - 1` and discount `log2(rank + 1)`; a list with no
/// positive grade scores 1.
pub fn ndcg(grades: &[u8], k: usize) -> f64 {
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let best = dcg(&ideal, k);
    if best == 0.0 {
        1.0
    } else {
        dcg(grades, k) / best
    }
}

/// Conjunction over the query's facets of "holds at least one facet entity".
pub fn satisfies(p: &MemberProfile, q: &StructuredQuery<f64>) -> bool {
    let held = p.entities();
    q.facets
        .iter()
        .filter(|(_, f)| !f.is_empty())
        .all(|(&kind, f)| f.iter().any(|e| held.contains(&EntityId { kind, id: e.id })))
}
