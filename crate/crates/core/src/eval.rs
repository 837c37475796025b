//! Offline evaluation: skill-selection accuracy, model comparison by NDCG
//! with paired t-tests, and per-list feature/label correlation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::{MemberId, MemberProfile};
use crate::error::{Error, Result};
use crate::expertise::ExpertiseMatrix;
use crate::label_gen::Dataset;
use crate::ltr::{evaluate_model, LinearModel};
use crate::query_builder::rank_skills;
use crate::scalar::Scalar;

/// Summed expertise of `results` on `skills`, divided by the number of
/// results.
pub fn avg_expertise<T: Scalar>(results: &[MemberId], skills: &[u32], expertise: &ExpertiseMatrix<T>) -> Result<T> {
    if results.is_empty() {
        return Err(Error::Empty("result set"));
    }
    let total: T = results
        .iter()
        .flat_map(|&r| skills.iter().map(move |&s| expertise.expertise_score(r, s)))
        .sum();
    Ok(total / T::of(results.len() as f64))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSelectionCase {
    pub ideal_candidates: Vec<MemberId>,
    pub relevant: Vec<MemberId>,
    pub nonrelevant: Vec<MemberId>,
    pub selected_skills: Vec<u32>,
}

/// Fraction of cases where relevant results have strictly higher average
/// expertise on the selected skills than non-relevant ones.
pub fn skill_selection_accuracy<T: Scalar>(cases: &[SkillSelectionCase], expertise: &ExpertiseMatrix<T>) -> Result<f64> {
    if cases.is_empty() {
        return Err(Error::Empty("skill selection cases"));
    }
    let mut hits = 0usize;
    for c in cases {
        let pos = avg_expertise(&c.relevant, &c.selected_skills, expertise)?;
        let neg = avg_expertise(&c.nonrelevant, &c.selected_skills, expertise)?;
        if pos > neg {
            hits += 1;
        }
    }
    Ok(hits as f64 / cases.len() as f64)
}

/// The `k` skills with the highest summed expertise over the candidates.
pub fn top_k_selector<T: Scalar>(ideal_candidates: &[&MemberProfile], k: usize, expertise: &ExpertiseMatrix<T>) -> Vec<u32> {
    rank_skills(ideal_candidates, expertise)
        .into_iter()
        .take(k)
        .map(|(s, _)| s)
        .collect()
}

/// Uniform sample without replacement of `min(k, n)` skills from the union
/// of the candidates' explicit skills.
pub fn rand_k_selector<R: Rng>(ideal_candidates: &[&MemberProfile], k: usize, rng: &mut R) -> Result<Vec<u32>> {
    let union: Vec<u32> = ideal_candidates
        .iter()
        .flat_map(|c| c.skill_ids())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if union.is_empty() {
        return Err(Error::Empty("explicit skills of the ideal candidates"));
    }
    Ok(union.choose_multiple(rng, k).copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub p_value: f64,
}

/// Two-sided paired t-test on `a - b`. All-zero differences give `p = 1`;
/// constant non-zero differences give `p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Invalid("paired t-test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        let (t, p_value) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(PairedTest {
            n,
            mean_difference: mean,
            t,
            p_value,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Invalid(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(PairedTest {
        n,
        mean_difference: mean,
        t,
        p_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub name: String,
    /// Mean NDCG per cutoff.
    pub mean: Vec<f64>,
    /// Per-list NDCG, one vector per cutoff.
    pub per_list: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub cutoff: usize,
    pub test: PairedTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub cutoffs: Vec<usize>,
    pub lists: usize,
    pub models: Vec<ModelScores>,
    pub pairs: Vec<PairComparison>,
}

impl ModelComparison {
    pub fn mean(&self, model: &str, cutoff: usize) -> Option<f64> {
        let c = self.cutoffs.iter().position(|&k| k == cutoff)?;
        self.models.iter().find(|m| m.name == model).map(|m| m.mean[c])
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "model");
        for k in &self.cutoffs {
            let _ = write!(out, "{:>10}", format!("NDCG@{k}"));
        }
        out.push('\n');
        for m in &self.models {
            let _ = write!(out, "{:<16}", m.name);
            for v in &m.mean {
                let _ = write!(out, "{v:>10.4}");
            }
            out.push('\n');
        }
        out.push('\n');
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{} vs {} @{}: diff {:+.4}  t {:.3}  p {:.4}",
                p.a, p.b, p.cutoff, p.test.mean_difference, p.test.t, p.test.p_value
            );
        }
        out
    }
}

/// Mean NDCG of each model on the test lists at every cutoff, plus a paired
/// t-test on per-list NDCG for every pair of models.
pub fn compare_models<T: Scalar>(
    models: &[(String, &LinearModel<T>)],
    test: &Dataset<T>,
    cutoffs: &[usize],
) -> Result<ModelComparison> {
    if test.lists.iter().all(|l| l.rows.is_empty()) {
        return Err(Error::Empty("test lists"));
    }
    if models.is_empty() || cutoffs.is_empty() {
        return Err(Error::Invalid("need at least one model and one cutoff".into()));
    }
    let mut scores = Vec::new();
    for (name, m) in models {
        let mut per_list = Vec::new();
        let mut mean = Vec::new();
        for &k in cutoffs {
            let v: Vec<f64> = evaluate_model(m, test, k)?.into_iter().map(|x| x.as_f64()).collect();
            mean.push(v.iter().sum::<f64>() / v.len() as f64);
            per_list.push(v);
        }
        scores.push(ModelScores {
            name: name.clone(),
            mean,
            per_list,
        });
    }
    let mut pairs = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            for (c, &k) in cutoffs.iter().enumerate() {
                let test = paired_t_test(&scores[j].per_list[c], &scores[i].per_list[c])?;
                pairs.push(PairComparison {
                    a: scores[j].name.clone(),
                    b: scores[i].name.clone(),
                    cutoff: k,
                    test,
                });
            }
        }
    }
    Ok(ModelComparison {
        cutoffs: cutoffs.to_vec(),
        lists: scores[0].per_list[0].len(),
        models: scores,
        pairs,
    })
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n == 0 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Per feature, the within-list Pearson correlation between feature values
/// and grades, averaged over lists. Registry order.
pub fn feature_label_correlation<T: Scalar>(data: &Dataset<T>) -> Vec<(String, f64)> {
    let lists: Vec<_> = data.lists.iter().filter(|l| !l.rows.is_empty()).collect();
    data.registry
        .names()
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let per_list: Vec<f64> = lists
                .par_iter()
                .map(|l| {
                    let x: Vec<f64> = l.rows.iter().map(|r| r.features[f].as_f64()).collect();
                    let y: Vec<f64> = l.rows.iter().map(|r| f64::from(r.grade.0)).collect();
                    pearson(&x, &y)
                })
                .collect();
            let mean = if per_list.is_empty() {
                0.0
            } else {
                per_list.iter().sum::<f64>() / per_list.len() as f64
            };
            (name.clone(), mean)
        })
        .collect()
}

/// Correlations sorted from strongest to weakest; ties keep registry order.
pub fn rank_correlations(mut c: Vec<(String, f64)>) -> Vec<(String, f64)> {
    c.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expertise::Stage;
    use crate::features::Registry;
    use crate::label_gen::{LabeledList, LabeledRow, Origin};
    use crate::ltr::Grade;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix() -> ExpertiseMatrix<f64> {
        ExpertiseMatrix::from_cells(Stage::Densified, [(1, 7, 0.8), (2, 7, 0.2), (3, 7, 0.2)]).unwrap()
    }

    #[test]
    fn avg_expertise_cases() {
        let e = matrix();
        assert!((avg_expertise(&[1], &[7], &e).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(avg_expertise(&[9], &[7], &e).unwrap(), 0.0);
        assert_eq!(avg_expertise(&[1, 2], &[7], &e).unwrap(), avg_expertise(&[1, 2, 1, 2], &[7], &e).unwrap());
        assert!(avg_expertise::<f64>(&[], &[7], &e).is_err());
    }

    #[test]
    fn accuracy_is_strict() {
        let e = matrix();
        let case = |relevant: Vec<MemberId>| SkillSelectionCase {
            ideal_candidates: vec![10],
            relevant,
            nonrelevant: vec![2],
            selected_skills: vec![7],
        };
        assert_eq!(skill_selection_accuracy(&[case(vec![1])], &e).unwrap(), 1.0);
        assert_eq!(skill_selection_accuracy(&[case(vec![3])], &e).unwrap(), 0.0);
        assert_eq!(skill_selection_accuracy(&[case(vec![1]), case(vec![3])], &e).unwrap(), 0.5);
        assert!(skill_selection_accuracy::<f64>(&[], &e).is_err());
    }

    #[test]
    fn rand_selector_exhausts_and_is_uniform() {
        let mut p = crate::corpus::tests::profile(1);
        p.skills = vec![(1, 0), (2, 0), (3, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut all = rand_k_selector(&[&p], 10, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![1, 2, 3]);

        p.skills = (10..15).map(|s| (s, 0)).collect();
        let mut counts = [0usize; 5];
        let n = 30_000;
        for _ in 0..n {
            let s = rand_k_selector(&[&p], 1, &mut rng).unwrap();
            counts[(s[0] - 10) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01, "{counts:?}");
        }
        p.skills.clear();
        assert!(rand_k_selector(&[&p], 1, &mut rng).is_err());
    }

    #[test]
    fn pearson_cases() {
        // Centred: (8/3, -1/3, -7/3) and (0.4, 0, -0.4); r = 2 / sqrt(38/3 * 0.32).
        let r = pearson(&[5.0, 2.0, 0.0], &[0.9, 0.5, 0.1]);
        assert!((r - 2.0 / (38.0f64 / 3.0 * 0.32).sqrt()).abs() < 1e-12);
        assert!((r - 0.9934).abs() < 1e-4, "{r}");
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[5.0, 2.0, 0.0]), 0.0);
        assert!((pearson(&[0.0, 2.0, 5.0], &[0.0, 2.0, 5.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_test_degenerate_cases() {
        let a = [0.5, 0.7, 0.9];
        let same = paired_t_test(&a, &a).unwrap();
        assert_eq!(same.p_value, 1.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
        assert_eq!(paired_t_test(&shifted, &a).unwrap().p_value, 0.0);
        let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.5, 2.5, 2.0, 3.0]).unwrap();
        // d = [0.5, -0.5, 1, 1]: mean 0.5, sd 0.7071, t = 1.4142, df 3.
        assert!((t.t - 2f64.sqrt()).abs() < 1e-9);
        assert!((t.p_value - 0.2522).abs() < 1e-3, "{}", t.p_value);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }

    fn lists() -> Dataset<f64> {
        let rows = |v: &[(u8, f64)]| {
            v.iter()
                .enumerate()
                .map(|(i, &(g, x))| LabeledRow {
                    member_id: i as u64,
                    grade: Grade(g),
                    features: vec![x, 1.0, -x],
                })
                .collect()
        };
        Dataset::new(
            Registry::new(&["oracle", "constant", "inverse"]),
            vec![
                LabeledList {
                    list_id: 0,
                    session_id: 0,
                    ideal_candidates: vec![100],
                    rows: rows(&[(5, 5.0), (0, 0.0), (2, 2.0)]),
                    origin: Origin::RandomizedBucket,
                },
                LabeledList {
                    list_id: 1,
                    session_id: 1,
                    ideal_candidates: vec![100],
                    rows: rows(&[(0, 0.0), (2, 2.0), (2, 2.0), (5, 5.0)]),
                    origin: Origin::RandomizedBucket,
                },
            ],
        )
    }

    #[test]
    fn correlation_of_oracle_and_constant_features() {
        let c = feature_label_correlation(&lists());
        assert!((c[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(c[1].1, 0.0);
        assert!((c[2].1 + 1.0).abs() < 1e-12);
        assert_eq!(rank_correlations(c)[0].0, "oracle");
    }

    #[test]
    fn comparison_of_oracle_and_identical_models() {
        let data = lists();
        let oracle = LinearModel::new(Registry::new(&["oracle"]), vec![1.0]).unwrap();
        let inverse = LinearModel::new(Registry::new(&["inverse"]), vec![1.0]).unwrap();
        let models = vec![
            ("oracle".to_string(), &oracle),
            ("twin".to_string(), &oracle),
            ("inverse".to_string(), &inverse),
        ];
        let cmp = compare_models(&models, &data, &[5, 15, 25]).unwrap();
        for k in [5, 15, 25] {
            assert_eq!(cmp.mean("oracle", k), Some(1.0));
            assert_eq!(cmp.mean("twin", k), Some(1.0));
            assert!(cmp.mean("inverse", k).unwrap() < 1.0);
        }
        let twin = cmp.pairs.iter().find(|p| p.a == "twin" && p.b == "oracle").unwrap();
        assert_eq!(twin.test.p_value, 1.0);
        assert!(cmp.pairs.iter().all(|p| p.test.p_value.is_finite()));
        assert!(cmp.table().contains("NDCG@15"));
        let empty = Dataset::<f64>::new(data.registry.clone(), vec![]);
        assert!(compare_models(&models, &empty, &[5]).is_err());
    }
}
