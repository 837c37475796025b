//! Ranking features.
//!
//! The first five features compare each result directly with the ideal
//! candidates (skill sets, titles, career paths); the last four are the
//! keyword-search features computed against the structured query.

mod baseline;
mod career;
mod profile;
mod similarity;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use baseline::{baseline_features, BaselineFeatures, PreparedQuery, Priors};
pub use career::{
    align, career_path_similarity, node_signals, node_similarity, node_similarity_prepared,
    CareerPathConfig, NodeSimilarityModel,
};
pub use profile::{PreparedPosition, PreparedProfile, ProfileCache, TermVector};
pub use similarity::{binary_cosine, jaccard, skill_cosine, skill_jaccard, sparse_cosine, title_similarity};

use crate::corpus::{Dictionaries, MemberId, MemberProfile};
use crate::error::{Error, Result};
use crate::expertise::ExpertiseMatrix;
use crate::query_builder::StructuredQuery;
use crate::scalar::Scalar;
use crate::text::StopWords;

pub const SKILL_JACCARD: &str = "skill_jaccard";
pub const SKILL_COSINE: &str = "skill_cosine";
pub const TITLE_JACCARD: &str = "title_jaccard";
pub const TITLE_COSINE: &str = "title_cosine";
pub const CAREER_PATH: &str = "career_path";
pub const SKILL_EXPERTISE: &str = "skill_expertise";
pub const TEXT_MATCH: &str = "text_match";
pub const ENTITY_TITLE_MATCH: &str = "entity_title_match";
pub const CTR_PRIOR: &str = "ctr_prior";

pub const FULL_FEATURES: [&str; 9] = [
    SKILL_JACCARD,
    SKILL_COSINE,
    TITLE_JACCARD,
    TITLE_COSINE,
    CAREER_PATH,
    SKILL_EXPERTISE,
    TEXT_MATCH,
    ENTITY_TITLE_MATCH,
    CTR_PRIOR,
];

pub const BASELINE_FEATURES: [&str; 4] = [SKILL_EXPERTISE, TEXT_MATCH, ENTITY_TITLE_MATCH, CTR_PRIOR];

/// Ordered feature names shared by feature vectors, datasets and models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Registry(Arc<Vec<String>>);

impl From<Vec<String>> for Registry {
    fn from(names: Vec<String>) -> Self {
        Registry(Arc::new(names))
    }
}

impl From<Registry> for Vec<String> {
    fn from(r: Registry) -> Self {
        r.0.as_ref().clone()
    }
}

impl Registry {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Self {
        Registry(Arc::new(names.iter().map(|s| s.as_ref().to_owned()).collect()))
    }

    pub fn full() -> Self {
        Self::new(&FULL_FEATURES)
    }

    pub fn baseline() -> Self {
        Self::new(&BASELINE_FEATURES)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    /// Column indices in `self` for every name of `target`.
    pub fn projection(&self, target: &Registry) -> Result<Vec<usize>> {
        target
            .names()
            .iter()
            .map(|n| {
                self.index(n)
                    .ok_or_else(|| Error::RegistryMismatch(format!("feature {n:?} not available")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureVector<T> {
    pub registry: Registry,
    pub values: Vec<T>,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(registry: Registry, values: Vec<T>) -> Result<Self> {
        if values.len() != registry.len() {
            return Err(Error::RegistryMismatch(format!(
                "{} values for {} features",
                values.len(),
                registry.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature value".into()));
        }
        Ok(FeatureVector { registry, values })
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.registry.index(name).map(|i| self.values[i])
    }

    pub fn project(&self, target: &Registry) -> Result<Self> {
        if &self.registry == target {
            return Ok(self.clone());
        }
        let cols = self.registry.projection(target)?;
        Ok(FeatureVector {
            registry: target.clone(),
            values: cols.iter().map(|&i| self.values[i]).collect(),
        })
    }
}

/// Shared, read-only inputs of feature extraction.
#[derive(Debug, Clone)]
pub struct FeatureContext<'a, T> {
    pub dicts: &'a Dictionaries,
    pub expertise: &'a ExpertiseMatrix<T>,
    pub priors: &'a Priors,
    pub stopwords: &'a StopWords,
    pub node_model: NodeSimilarityModel<T>,
    pub career: CareerPathConfig<T>,
}

impl<'a, T: Scalar> FeatureContext<'a, T> {
    pub fn new(
        dicts: &'a Dictionaries,
        expertise: &'a ExpertiseMatrix<T>,
        priors: &'a Priors,
        stopwords: &'a StopWords,
    ) -> Self {
        FeatureContext {
            dicts,
            expertise,
            priors,
            stopwords,
            node_model: NodeSimilarityModel::default(),
            career: CareerPathConfig::default(),
        }
    }

    pub fn prepare(&self, p: &MemberProfile) -> PreparedProfile<T> {
        PreparedProfile::new(p, self.dicts, self.stopwords)
    }

    pub fn extractor<'b>(
        &'b self,
        ideal_candidates: Vec<&'b PreparedProfile<T>>,
        query: &StructuredQuery<T>,
    ) -> Extractor<'b, T> {
        Extractor {
            ctx: self,
            ic_ids: ideal_candidates.iter().map(|c| c.member_id).collect(),
            ideal_candidates,
            query: PreparedQuery::new(query, self.dicts, self.stopwords),
        }
    }
}

/// Extracts feature vectors for many results of one (candidates, query) pair.
pub struct Extractor<'a, T> {
    ctx: &'a FeatureContext<'a, T>,
    ideal_candidates: Vec<&'a PreparedProfile<T>>,
    ic_ids: Vec<MemberId>,
    query: PreparedQuery,
}

impl<'a, T: Scalar> Extractor<'a, T> {
    /// Values in [`FULL_FEATURES`] order.
    pub fn values(&self, r: &PreparedProfile<T>) -> [T; 9] {
        let ctx = self.ctx;
        let ics = &self.ideal_candidates;
        let (title_jaccard, title_cosine) = title_similarity(ics, r);
        let career = if ics.is_empty() {
            T::zero()
        } else {
            let sum: T = ics
                .iter()
                .map(|c| {
                    career_path_similarity(&c.positions, &r.positions, &ctx.node_model, ctx.dicts, &ctx.career)
                })
                .sum();
            sum / T::of(ics.len() as f64)
        };
        let base = baseline_features(&self.query, r, ctx.expertise, ctx.priors);
        [
            skill_jaccard(ics, r),
            skill_cosine(&self.ic_ids, r.member_id, ctx.expertise),
            title_jaccard,
            title_cosine,
            career,
            base.skill_expertise,
            base.text_match,
            base.entity_title_match,
            base.ctr_prior,
        ]
    }

    pub fn extract(&self, r: &PreparedProfile<T>) -> FeatureVector<T> {
        FeatureVector {
            registry: Registry::full(),
            values: self.values(r).to_vec(),
        }
    }
}

/// Full feature vector of one result.
pub fn extract_features<T: Scalar>(
    ctx: &FeatureContext<'_, T>,
    ideal_candidates: &[&PreparedProfile<T>],
    query: &StructuredQuery<T>,
    r: &PreparedProfile<T>,
) -> FeatureVector<T> {
    ctx.extractor(ideal_candidates.to_vec(), query).extract(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityKind, Position, YearMonth};
    use crate::expertise::Stage;

    fn member(id: MemberId, skills: &[u32], title: &str, d: &Dictionaries) -> MemberProfile {
        let company = d.company.standardize("LinkedIn").unwrap();
        MemberProfile {
            member_id: id,
            name: format!("m{id}"),
            headline: format!("{title} at LinkedIn"),
            skills: skills.iter().map(|&s| (s, 3)).collect(),
            positions: vec![
                Position {
                    raw_title: "Software Engineer".into(),
                    title_id: d.title.standardize("Software Engineer"),
                    company_id: Some(company),
                    industry_id: d.company_industry(company),
                    start: YearMonth::new(2010, 1).unwrap(),
                    end: Some(YearMonth::new(2014, 1).unwrap()),
                    description: "search ranking infrastructure".into(),
                    seniority: 3,
                },
                Position {
                    raw_title: title.into(),
                    title_id: d.title.standardize(title),
                    company_id: Some(company),
                    industry_id: d.company_industry(company),
                    start: YearMonth::new(2014, 2).unwrap(),
                    end: None,
                    description: "machine learning for search".into(),
                    seniority: 7,
                },
            ],
            location: None,
        }
    }

    #[test]
    fn baseline_hand_values() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let (ml, ir) = (
            d.skill.standardize("machine learning").unwrap(),
            d.skill.standardize("information retrieval").unwrap(),
        );
        let staff = d.title.standardize("Staff Software Engineer").unwrap();
        let e = ExpertiseMatrix::from_cells(Stage::Densified, [(5, ml, 0.9f64), (5, ir, 0.5)]).unwrap();
        let r = member(5, &[ml], "Staff Software Engineer", &d);
        let mut q = StructuredQuery::default();
        q.set_facet(EntityKind::Skill, vec![(ml, 1.0), (ir, 1.0)]);
        q.set_facet(EntityKind::Title, vec![(staff, 1.0)]);
        let priors = Priors::new([(6, 0.4)]).unwrap();
        let pq = PreparedQuery::new(&q, &d, &sw);
        let f = baseline_features(&pq, &PreparedProfile::new(&r, &d, &sw), &e, &priors);
        assert!((f.skill_expertise - 1.4).abs() < 1e-12);
        assert_eq!(f.entity_title_match, 1.0);
        assert_eq!(f.ctr_prior, 0.0);
        // Tokens: machine, learning, information, retrieval, staff, software, engineer.
        // The profile text lacks "information" and "retrieval".
        assert!((f.text_match - 5.0 / 7.0).abs() < 1e-12, "{}", f.text_match);
    }

    #[test]
    fn self_similarity_is_maximal() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let skills = [1, 2, 3];
        let p = member(1, &skills, "Staff Software Engineer", &d);
        let e = ExpertiseMatrix::from_cells(Stage::Densified, [(1, 1, 0.8f64), (1, 2, 0.4)]).unwrap();
        let priors = Priors::default();
        let ctx = FeatureContext::new(&d, &e, &priors, &sw);
        let prepared = ctx.prepare(&p);
        let q = StructuredQuery::default();
        let fv = extract_features(&ctx, &[&prepared], &q, &prepared);
        assert_eq!(fv.values.len(), 9);
        assert_eq!(fv.get(SKILL_JACCARD), Some(1.0));
        assert!((fv.get(SKILL_COSINE).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fv.get(TITLE_JACCARD), Some(1.0));
        assert_eq!(fv.get(TITLE_COSINE), Some(1.0));
        assert!((fv.get(CAREER_PATH).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_candidates_zeroes_similarity_features() {
        let d = Dictionaries::bundled();
        let sw = StopWords::bundled();
        let p = member(1, &[1], "Staff Software Engineer", &d);
        let e = ExpertiseMatrix::<f32>::new(Stage::Densified);
        let priors = Priors::new([(1, 0.25)]).unwrap();
        let ctx = FeatureContext::new(&d, &e, &priors, &sw);
        let r = ctx.prepare(&p);
        let fv = extract_features(&ctx, &[], &StructuredQuery::default(), &r);
        assert_eq!(&fv.values[..5], &[0.0; 5]);
        assert_eq!(fv.get(CTR_PRIOR), Some(0.25));
    }

    #[test]
    fn projection_and_registry_checks() {
        let fv = FeatureVector::new(Registry::full(), (0..9).map(f64::from).collect()).unwrap();
        let base = fv.project(&Registry::baseline()).unwrap();
        assert_eq!(base.values, vec![5.0, 6.0, 7.0, 8.0]);
        assert!(base.project(&Registry::full()).is_err());
        assert!(FeatureVector::new(Registry::full(), vec![0.0f64; 3]).is_err());
        assert!(FeatureVector::new(Registry::baseline(), vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let json = serde_json::to_string(&Registry::baseline()).unwrap();
        assert_eq!(json, r#"["skill_expertise","text_match","entity_title_match","ctr_prior"]"#);
    }
}
