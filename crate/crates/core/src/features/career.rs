//! Career-path similarity: optimal global alignment of two position
//! sequences with a position-level similarity model and a linear gap penalty.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dictionaries, Position};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::StopWords;

use super::profile::PreparedPosition;
use super::similarity::jaccard;

/// Weights of the position-level signals. They must be non-negative and sum
/// to one so that the combined similarity stays in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NodeSimilarityModel<T> {
    pub company_match: T,
    pub company_similarity: T,
    pub industry_match: T,
    pub industry_similarity: T,
    pub title_match: T,
    pub title_similarity: T,
    pub description_similarity: T,
    pub seniority_similarity: T,
}

impl<T: Scalar> Default for NodeSimilarityModel<T> {
    fn default() -> Self {
        Self::from_array([T::of(0.125); 8])
    }
}

impl<T: Scalar> NodeSimilarityModel<T> {
    pub const SIGNALS: [&'static str; 8] = [
        "company_match",
        "company_similarity",
        "industry_match",
        "industry_similarity",
        "title_match",
        "title_similarity",
        "description_similarity",
        "seniority_similarity",
    ];

    pub fn from_array(w: [T; 8]) -> Self {
        NodeSimilarityModel {
            company_match: w[0],
            company_similarity: w[1],
            industry_match: w[2],
            industry_similarity: w[3],
            title_match: w[4],
            title_similarity: w[5],
            description_similarity: w[6],
            seniority_similarity: w[7],
        }
    }

    pub fn as_array(&self) -> [T; 8] {
        [
            self.company_match,
            self.company_similarity,
            self.industry_match,
            self.industry_similarity,
            self.title_match,
            self.title_similarity,
            self.description_similarity,
            self.seniority_similarity,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|&x| !(x >= T::zero())) {
            return Err(Error::Config("node similarity weights must be non-negative".into()));
        }
        let sum: T = w.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-6) {
            return Err(Error::Config(format!("node similarity weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CareerPathConfig<T> {
    /// Non-positive score added for every skipped position.
    pub gap_penalty: T,
    /// Divide by the longer sequence length and clamp to [0, 1].
    pub normalize: bool,
}

impl<T: Scalar> Default for CareerPathConfig<T> {
    fn default() -> Self {
        CareerPathConfig {
            gap_penalty: T::of(-0.1),
            normalize: true,
        }
    }
}

impl<T: Scalar> CareerPathConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_penalty <= T::zero()) {
            return Err(Error::Config("gap penalty must be <= 0".into()));
        }
        Ok(())
    }
}

fn indicator<T: Scalar>(a: Option<u32>, b: Option<u32>) -> T {
    match (a, b) {
        (Some(x), Some(y)) if x == y => T::one(),
        _ => T::zero(),
    }
}

/// The eight position-level signals, each in [0, 1], in
/// [`NodeSimilarityModel::SIGNALS`] order.
pub fn node_signals<T: Scalar>(
    p: &PreparedPosition<T>,
    q: &PreparedPosition<T>,
    dicts: &Dictionaries,
) -> [T; 8] {
    let company_similarity = match (p.company_id, q.company_id) {
        (Some(a), Some(b)) => T::of(dicts.company.similarity(a, b).max(dicts.company.similarity(b, a))),
        _ => T::zero(),
    };
    let industry_similarity = match (p.industry_id, q.industry_id) {
        (Some(a), Some(b)) => T::of(dicts.industry_similarity(a, b)),
        _ => T::zero(),
    };
    let gap = (i32::from(p.seniority) - i32::from(q.seniority)).abs();
    [
        indicator(p.company_id, q.company_id),
        company_similarity,
        indicator(p.industry_id, q.industry_id),
        industry_similarity,
        indicator(p.title_id, q.title_id),
        jaccard(&p.title_words, &q.title_words),
        p.description.cosine(&q.description),
        (T::one() - T::of(f64::from(gap) / 9.0)).clamp01(),
    ]
}

pub fn node_similarity_prepared<T: Scalar>(
    p: &PreparedPosition<T>,
    q: &PreparedPosition<T>,
    model: &NodeSimilarityModel<T>,
    dicts: &Dictionaries,
) -> T {
    let signals = node_signals(p, q, dicts);
    model
        .as_array()
        .iter()
        .zip(signals)
        .map(|(&w, s)| w * s)
        .sum::<T>()
        .clamp01()
}

/// Weighted position similarity in [0, 1].
pub fn node_similarity<T: Scalar>(
    p: &Position,
    q: &Position,
    model: &NodeSimilarityModel<T>,
    dicts: &Dictionaries,
    stopwords: &StopWords,
) -> T {
    node_similarity_prepared(
        &PreparedPosition::new(p, dicts, stopwords),
        &PreparedPosition::new(q, dicts, stopwords),
        model,
        dicts,
    )
}

/// Global alignment score of sequences of length `n` and `m`:
///
/// `D(i,j) = max(D(i-1,j-1) + sim(i-1,j-1), D(i-1,j) + gap, D(i,j-1) + gap)`
/// with `D(i,0) = i*gap` and `D(0,j) = j*gap`.
pub fn align<T: Scalar>(n: usize, m: usize, sim: impl Fn(usize, usize) -> T, gap: T) -> T {
    let mut prev: Vec<T> = (0..=m).map(|j| gap * T::of(j as f64)).collect();
    let mut cur = vec![T::zero(); m + 1];
    for i in 1..=n {
        cur[0] = gap * T::of(i as f64);
        for j in 1..=m {
            let diag = prev[j - 1] + sim(i - 1, j - 1);
            let up = prev[j] + gap;
            let left = cur[j - 1] + gap;
            cur[j] = diag.max(up).max(left);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Career-path similarity of two position sequences; zero if either is empty.
pub fn career_path_similarity<T: Scalar>(
    p: &[PreparedPosition<T>],
    q: &[PreparedPosition<T>],
    model: &NodeSimilarityModel<T>,
    dicts: &Dictionaries,
    cfg: &CareerPathConfig<T>,
) -> T {
    if p.is_empty() || q.is_empty() {
        return T::zero();
    }
    let score = align(
        p.len(),
        q.len(),
        |i, j| node_similarity_prepared(&p[i], &q[j], model, dicts),
        cfg.gap_penalty,
    );
    if cfg.normalize {
        (score / T::of(p.len().max(q.len()) as f64)).clamp01()
    } else {
        score
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::YearMonth;

    fn pos(title: u32, company: u32, seniority: u8) -> Position {
        let d = Dictionaries::bundled();
        Position {
            raw_title: d.title.name(title).unwrap().into(),
            title_id: Some(title),
            company_id: Some(company),
            industry_id: d.company_industry(company),
            start: YearMonth::new(2012, 3).unwrap(),
            end: None,
            description: "ranking models for search".into(),
            seniority,
        }
    }

    #[test]
    fn identical_positions_score_one() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let p = pos(3, 2, 7);
        let s: f64 = node_similarity(&p, &p, &NodeSimilarityModel::default(), &d, &sw);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_positions_score_zero() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let mut p = pos(0, 0, 1);
        p.description = "kubernetes clusters".into();
        let mut q = pos(40, 45, 10);
        q.raw_title = "Nurse".into();
        q.description = "patient care".into();
        let signals = node_signals(
            &PreparedPosition::<f64>::new(&p, &d, &sw),
            &PreparedPosition::new(&q, &d, &sw),
            &d,
        );
        assert_eq!(signals, [0.0; 8]);
        let s: f64 = node_similarity(&p, &q, &NodeSimilarityModel::default(), &d, &sw);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn single_weighted_signal() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let mut w = [0.0f64; 8];
        w[4] = 0.2;
        w[0] = 0.8;
        let model = NodeSimilarityModel::from_array(w);
        model.validate().unwrap();
        let p = pos(3, 0, 7);
        let mut q = pos(3, 45, 2);
        q.raw_title = "Different".into();
        let s: f64 = node_similarity(&p, &q, &model, &d, &sw);
        assert!((s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn node_similarity_is_symmetric() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let m = NodeSimilarityModel::default();
        for (a, b) in [((0, 0, 3), (2, 1, 5)), ((3, 4, 7), (12, 12, 5)), ((10, 10, 4), (0, 3, 3))] {
            let (p, q) = (pos(a.0, a.1, a.2), pos(b.0, b.1, b.2));
            let x: f64 = node_similarity(&p, &q, &m, &d, &sw);
            let y: f64 = node_similarity(&q, &p, &m, &d, &sw);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn model_validation() {
        assert!(NodeSimilarityModel::<f64>::default().validate().is_ok());
        assert!(NodeSimilarityModel::from_array([0.5f64; 8]).validate().is_err());
        let mut w = [0.0f64; 8];
        w[0] = 1.5;
        w[1] = -0.5;
        assert!(NodeSimilarityModel::from_array(w).validate().is_err());
        assert!(CareerPathConfig { gap_penalty: 0.1f64, normalize: true }.validate().is_err());
    }

    #[test]
    fn alignment_hand_cases() {
        // One aligned pair.
        assert_eq!(align(1, 1, |_, _| 1.0f64, -0.1), 1.0);
        // s(p1,q1) = 0.9, s(p2,q1) = 0.2, gap -0.1: align p1-q1, skip p2.
        let sims = [[0.9f64], [0.2]];
        let d = align(2, 1, |i, j| sims[i][j], -0.1);
        assert!((d - 0.8).abs() < 1e-12);
        // Empty sequences reduce to gaps.
        assert!((align(0, 3, |_, _| 1.0f64, -0.1) + 0.3).abs() < 1e-12);
    }

    #[test]
    fn identical_sequences_with_zero_gap() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let path: Vec<PreparedPosition<f64>> = [pos(0, 0, 3), pos(2, 1, 5), pos(3, 2, 7)]
            .iter()
            .map(|p| PreparedPosition::new(p, &d, &sw))
            .collect();
        let m = NodeSimilarityModel::default();
        let raw = CareerPathConfig { gap_penalty: 0.0, normalize: false };
        let s = career_path_similarity(&path, &path, &m, &d, &raw);
        assert!((s - 3.0).abs() < 1e-12);
        let norm = CareerPathConfig { gap_penalty: 0.0, normalize: true };
        assert!((career_path_similarity(&path, &path, &m, &d, &norm) - 1.0).abs() < 1e-12);
        assert_eq!(career_path_similarity(&path, &[], &m, &d, &norm), 0.0);
    }

    #[test]
    fn normalized_score_is_bounded() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let a: Vec<PreparedPosition<f64>> = [pos(0, 0, 1), pos(40, 45, 10)]
            .iter()
            .map(|p| PreparedPosition::new(p, &d, &sw))
            .collect();
        let b = vec![PreparedPosition::new(&pos(80, 90, 5), &d, &sw)];
        let cfg = CareerPathConfig::default();
        let s = career_path_similarity(&a, &b, &NodeSimilarityModel::default(), &d, &cfg);
        assert!((0.0..=1.0).contains(&s));
    }
}
