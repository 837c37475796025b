//! Listwise learning to rank: NDCG@k and cyclic coordinate ascent over the
//! weights of a linear scoring function.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::MemberId;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Registry};
use crate::label_gen::{Dataset, LabeledList};
use crate::scalar::Scalar;

/// Graded relevance label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grade(pub u8);

impl Grade {
    pub const RELEVANT: Grade = Grade(5);
    pub const SOMEWHAT: Grade = Grade(2);
    pub const IRRELEVANT: Grade = Grade(0);

    /// `2^grade - 1`.
    pub fn gain<T: Scalar>(self) -> T {
        T::of(2f64.powi(i32::from(self.0)) - 1.0)
    }
}

/// The three grades assigned to inmailed, clicked and skipped results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeScheme {
    pub inmailed: Grade,
    pub clicked: Grade,
    pub skipped: Grade,
}

impl Default for GradeScheme {
    fn default() -> Self {
        GradeScheme {
            inmailed: Grade::RELEVANT,
            clicked: Grade::SOMEWHAT,
            skipped: Grade::IRRELEVANT,
        }
    }
}

impl GradeScheme {
    pub fn allows(&self, g: Grade) -> bool {
        g == self.inmailed || g == self.clicked || g == self.skipped
    }
}

fn discount<T: Scalar>(rank0: usize) -> T {
    T::one() / T::of((rank0 as f64 + 2.0).log2())
}

fn dcg<T: Scalar>(grades: impl Iterator<Item = Grade>, k: usize) -> T {
    grades.take(k).enumerate().map(|(i, g)| g.gain::<T>() * discount::<T>(i)).sum()
}

/// NDCG@k of grades listed in ranked order. A list whose top-k ideal DCG is
/// zero (all grades zero) scores 1.
pub fn ndcg_at_k<T: Scalar>(grades: &[Grade], k: usize) -> Result<T> {
    if k == 0 {
        return Err(Error::Invalid("NDCG cutoff must be at least 1".into()));
    }
    if grades.is_empty() {
        return Err(Error::Empty("graded list"));
    }
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: T = dcg(ideal.into_iter(), k);
    if idcg == T::zero() {
        return Ok(T::one());
    }
    Ok(dcg::<T>(grades.iter().copied(), k) / idcg)
}

/// Orders `(member, score)` pairs by descending score, ties by ascending id.
pub fn sort_ranked<T: Scalar>(items: &mut [(MemberId, T)]) {
    items.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMetadata {
    pub ndcg_cutoff: usize,
    pub train_ndcg: f64,
    pub valid_ndcg: f64,
    pub sweeps: usize,
    pub accepted_steps: usize,
    pub rng_seed: u64,
    pub train_lists: usize,
    pub valid_lists: usize,
    #[serde(default)]
    pub note: String,
}

/// Linear scoring function over a feature registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub registry: Registry,
    pub weights: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<TrainingMetadata>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn new(registry: Registry, weights: Vec<T>) -> Result<Self> {
        if weights.len() != registry.len() {
            return Err(Error::RegistryMismatch(format!(
                "{} weights for {} features",
                weights.len(),
                registry.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("non-finite model weight".into()));
        }
        Ok(LinearModel {
            registry,
            weights,
            metadata: None,
        })
    }

    pub fn uniform(registry: Registry) -> Self {
        let w = T::one() / T::of(registry.len().max(1) as f64);
        let weights = vec![w; registry.len()];
        LinearModel {
            registry,
            weights,
            metadata: None,
        }
    }

    /// Dot product with a vector over the same registry.
    pub fn score(&self, fv: &FeatureVector<T>) -> Result<T> {
        if fv.registry != self.registry {
            return Err(Error::RegistryMismatch(format!(
                "model expects {:?}, vector has {:?}",
                self.registry.names(),
                fv.registry.names()
            )));
        }
        Ok(self.score_values(&fv.values))
    }

    pub fn score_values(&self, values: &[T]) -> T {
        self.weights.iter().zip(values).map(|(&w, &x)| w * x).sum()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: Self = serde_json::from_str(&text).map_err(|e| Error::parse("model file", e))?;
        LinearModel::new(model.registry.clone(), model.weights.clone())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Scores and orders results: descending score, ties by ascending member id.
pub fn rank<T: Scalar>(
    model: &LinearModel<T>,
    results: &[(MemberId, FeatureVector<T>)],
) -> Result<Vec<(MemberId, T)>> {
    let mut scored = results
        .iter()
        .map(|(m, fv)| Ok((*m, model.score(fv)?)))
        .collect::<Result<Vec<_>>>()?;
    sort_ranked(&mut scored);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ndcg_cutoff: usize,
    pub step_grid: Vec<f64>,
    pub sweeps_max: usize,
    pub tolerance: f64,
    pub rng_seed: u64,
    /// Extra runs from random starting weights, after the uniform start.
    pub restarts: usize,
    /// Drop lists whose grades are all zero instead of scoring them as 1.
    pub drop_all_zero: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ndcg_cutoff: 15,
            step_grid: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            sweeps_max: 25,
            tolerance: 1e-6,
            rng_seed: 0,
            restarts: 1,
            drop_all_zero: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ndcg_cutoff == 0 {
            return Err(Error::Config("ndcg cutoff must be positive".into()));
        }
        if self.step_grid.is_empty() || self.step_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("step grid must be non-empty and positive".into()));
        }
        if self.sweeps_max == 0 {
            return Err(Error::Config("sweeps_max must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub initial_weights: Vec<T>,
    /// Mean training NDCG at the start and after every accepted step.
    pub history: Vec<T>,
    pub sweeps: usize,
    pub best_valid: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<T> {
    pub model: LinearModel<T>,
    pub runs: Vec<RunTrace<T>>,
}

/// Dense, training-friendly copy of one labeled list.
struct PackedList<T> {
    members: Vec<MemberId>,
    grades: Vec<Grade>,
    /// Row-major `rows x dim`.
    features: Vec<T>,
    idcg: T,
}

impl<T: Scalar> PackedList<T> {
    fn new(list: &LabeledList<T>, dim: usize, k: usize) -> Result<Self> {
        let mut features = Vec::with_capacity(list.rows.len() * dim);
        for row in &list.rows {
            if row.features.len() != dim {
                return Err(Error::RegistryMismatch(format!(
                    "list {} row {} has {} features, registry has {dim}",
                    list.list_id,
                    row.member_id,
                    row.features.len()
                )));
            }
            features.extend_from_slice(&row.features);
        }
        let mut ideal: Vec<Grade> = list.rows.iter().map(|r| r.grade).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        Ok(PackedList {
            members: list.rows.iter().map(|r| r.member_id).collect(),
            grades: list.rows.iter().map(|r| r.grade).collect(),
            features,
            idcg: dcg(ideal.into_iter(), k),
        })
    }

    fn len(&self) -> usize {
        self.members.len()
    }

    fn scores(&self, w: &[T]) -> Vec<T> {
        let d = w.len();
        (0..self.len())
            .map(|i| {
                self.features[i * d..(i + 1) * d]
                    .iter()
                    .zip(w)
                    .map(|(&x, &wi)| x * wi)
                    .sum()
            })
            .collect()
    }

    fn ndcg(&self, scores: &[T], k: usize) -> T {
        if self.idcg == T::zero() {
            return T::one();
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(Ordering::Equal)
                .then(self.members[a].cmp(&self.members[b]))
        });
        dcg::<T>(order.into_iter().map(|i| self.grades[i]), k) / self.idcg
    }
}

fn pack<T: Scalar>(data: &Dataset<T>, cfg: &TrainConfig) -> Result<Vec<PackedList<T>>> {
    let dim = data.registry.len();
    data.lists
        .iter()
        .filter(|l| !l.rows.is_empty())
        .filter(|l| !cfg.drop_all_zero || l.rows.iter().any(|r| r.grade.0 > 0))
        .map(|l| PackedList::new(l, dim, cfg.ndcg_cutoff))
        .collect()
}

fn mean<T: Scalar>(values: Vec<T>) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let n = T::of(values.len() as f64);
    values.into_iter().sum::<T>() / n
}

fn mean_ndcg<T: Scalar>(lists: &[PackedList<T>], w: &[T], k: usize) -> T {
    mean(lists.par_iter().map(|l| l.ndcg(&l.scores(w), k)).collect())
}

/// Trains a linear model by cyclic coordinate ascent on mean training
/// NDCG@cutoff.
///
/// For each coordinate every signed step of the grid is tried; the best
/// candidate is accepted only if it strictly improves the training
/// objective, so the objective never decreases. A run stops once a full
/// sweep gains less than the tolerance. The returned weights are those with
/// the best validation NDCG seen across all accepted steps of all runs
/// (training NDCG when there is no validation data).
pub fn train_coordinate_ascent<T: Scalar>(
    train: &Dataset<T>,
    valid: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    cfg.validate()?;
    if train.registry.is_empty() {
        return Err(Error::Empty("feature registry"));
    }
    if !valid.lists.is_empty() && valid.registry != train.registry {
        return Err(Error::RegistryMismatch(
            "training and validation registries differ".into(),
        ));
    }
    let k = cfg.ndcg_cutoff;
    let train_lists = pack(train, cfg)?;
    if train_lists.is_empty() {
        return Err(Error::Empty("training lists"));
    }
    let valid_lists = pack(valid, cfg)?;
    let dim = train.registry.len();

    let select = |w: &[T], train_score: T| -> T {
        if valid_lists.is_empty() {
            train_score
        } else {
            mean_ndcg(&valid_lists, w, k)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut starts = vec![vec![T::one() / T::of(dim as f64); dim]];
    for _ in 0..cfg.restarts {
        starts.push((0..dim).map(|_| T::of(rng.random_range(-1.0..=1.0))).collect());
    }

    let steps: Vec<T> = cfg
        .step_grid
        .iter()
        .flat_map(|&s| [T::of(s), T::of(-s)])
        .collect();

    let mut best: Option<(T, Vec<T>, T)> = None;
    let mut runs = Vec::new();
    let mut total_steps = 0;
    let mut total_sweeps = 0;
    for start in starts {
        let mut w = start.clone();
        let mut scores: Vec<Vec<T>> = train_lists.iter().map(|l| l.scores(&w)).collect();
        let mut current = mean(
            train_lists
                .par_iter()
                .zip(&scores)
                .map(|(l, s)| l.ndcg(s, k))
                .collect(),
        );
        let mut history = vec![current];
        let mut run_best = select(&w, current);
        if best.as_ref().is_none_or(|b| run_best > b.0) {
            best = Some((run_best, w.clone(), current));
        }
        let mut sweeps = 0;
        while sweeps < cfg.sweeps_max {
            sweeps += 1;
            let sweep_start = current;
            for j in 0..dim {
                let candidate_scores: Vec<T> = steps
                    .iter()
                    .map(|&delta| {
                        mean(
                            train_lists
                                .par_iter()
                                .zip(scores.par_iter())
                                .map(|(l, s)| {
                                    let shifted: Vec<T> = s
                                        .iter()
                                        .enumerate()
                                        .map(|(i, &v)| v + delta * l.features[i * dim + j])
                                        .collect();
                                    l.ndcg(&shifted, k)
                                })
                                .collect(),
                        )
                    })
                    .collect();
                let (best_idx, &best_score) = candidate_scores
                    .iter()
                    .enumerate()
                    .fold(None, |acc: Option<(usize, &T)>, (i, v)| match acc {
                        Some((_, b)) if *v <= *b => acc,
                        _ => Some((i, v)),
                    })
                    .expect("step grid is non-empty");
                if best_score > current {
                    let delta = steps[best_idx];
                    w[j] += delta;
                    for (l, s) in train_lists.iter().zip(scores.iter_mut()) {
                        for (i, v) in s.iter_mut().enumerate() {
                            *v += delta * l.features[i * dim + j];
                        }
                    }
                    current = best_score;
                    history.push(current);
                    total_steps += 1;
                    let v = select(&w, current);
                    if v > run_best {
                        run_best = v;
                    }
                    if best.as_ref().is_none_or(|b| v > b.0) {
                        best = Some((v, w.clone(), current));
                    }
                }
            }
            if current - sweep_start < T::of(cfg.tolerance) {
                break;
            }
        }
        total_sweeps += sweeps;
        runs.push(RunTrace {
            initial_weights: start,
            history,
            sweeps,
            best_valid: run_best,
        });
    }

    let (valid_score, weights, train_score) = best.expect("at least one run");
    let mut model = LinearModel::new(train.registry.clone(), weights)?;
    model.metadata = Some(TrainingMetadata {
        ndcg_cutoff: k,
        train_ndcg: train_score.as_f64(),
        valid_ndcg: valid_score.as_f64(),
        sweeps: total_sweeps,
        accepted_steps: total_steps,
        rng_seed: cfg.rng_seed,
        train_lists: train_lists.len(),
        valid_lists: valid_lists.len(),
        note: String::new(),
    });
    Ok(Trained { model, runs })
}

/// Mean NDCG@k of a model over a dataset; the model registry must be a
/// subset of the dataset registry.
pub fn evaluate_model<T: Scalar>(model: &LinearModel<T>, data: &Dataset<T>, k: usize) -> Result<Vec<T>> {
    let cols = data.registry.projection(&model.registry)?;
    data.lists
        .iter()
        .filter(|l| !l.rows.is_empty())
        .map(|l| {
            let mut scored: Vec<(MemberId, T)> = l
                .rows
                .iter()
                .map(|r| {
                    let s = cols.iter().zip(&model.weights).map(|(&c, &w)| w * r.features[c]).sum();
                    (r.member_id, s)
                })
                .collect();
            sort_ranked(&mut scored);
            let grades: Vec<Grade> = scored
                .iter()
                .map(|(m, _)| l.rows.iter().find(|r| r.member_id == *m).expect("row").grade)
                .collect();
            ndcg_at_k(&grades, k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_gen::{LabeledRow, Origin};

    fn g(v: &[u8]) -> Vec<Grade> {
        v.iter().map(|&x| Grade(x)).collect()
    }

    #[test]
    fn ndcg_hand_cases() {
        assert_eq!(ndcg_at_k::<f64>(&g(&[5, 2, 0]), 3).unwrap(), 1.0);
        let v: f64 = ndcg_at_k(&g(&[0, 2, 5]), 3).unwrap();
        // DCG = 3/log2(3) + 31/2, IDCG = 31 + 3/log2(3).
        assert!((v - 0.5288).abs() < 1e-3, "{v}");
        assert_eq!(ndcg_at_k::<f64>(&g(&[0, 0, 0]), 3).unwrap(), 1.0);
        assert!(ndcg_at_k::<f64>(&[], 3).is_err());
        assert!(ndcg_at_k::<f64>(&g(&[5]), 0).is_err());
        let single: f32 = ndcg_at_k(&g(&[0, 5]), 1).unwrap();
        assert_eq!(single, 0.0);
    }

    #[test]
    fn scoring_hand_cases() {
        let reg = Registry::new(&["a", "b"]);
        let fv = FeatureVector::new(reg.clone(), vec![0.5f64, 0.25]).unwrap();
        let zero = LinearModel::new(reg.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.score(&fv).unwrap(), 0.0);
        let unit = LinearModel::new(reg.clone(), vec![0.0, 1.0]).unwrap();
        assert_eq!(unit.score(&fv).unwrap(), 0.25);
        let m = LinearModel::new(reg.clone(), vec![1.0, 2.0]).unwrap();
        assert_eq!(m.score(&fv).unwrap(), 1.0);
        let other = FeatureVector::new(Registry::new(&["a", "c"]), vec![0.5, 0.25]).unwrap();
        assert!(matches!(m.score(&other), Err(Error::RegistryMismatch(_))));
        assert!(LinearModel::new(reg, vec![1.0f64]).is_err());
    }

    #[test]
    fn rank_orders_by_score_then_id() {
        let reg = Registry::new(&["a"]);
        let fv = |x: f64| FeatureVector::new(reg.clone(), vec![x]).unwrap();
        let m = LinearModel::new(reg.clone(), vec![1.0]).unwrap();
        let items = vec![(3, fv(0.1)), (9, fv(0.9)), (2, fv(0.1))];
        let ranked = rank(&m, &items).unwrap();
        let ids: Vec<MemberId> = ranked.iter().map(|r| r.0).collect();
        assert_eq!(ids, vec![9, 2, 3]);
        let scaled = LinearModel::new(reg, vec![3.0]).unwrap();
        let again: Vec<MemberId> = rank(&scaled, &items).unwrap().iter().map(|r| r.0).collect();
        assert_eq!(again, ids);
    }

    fn dataset(lists: Vec<Vec<(u8, Vec<f64>)>>, names: &[&str]) -> Dataset<f64> {
        Dataset {
            registry: Registry::new(names),
            lists: lists
                .into_iter()
                .enumerate()
                .map(|(i, rows)| LabeledList {
                    list_id: i as u64,
                    session_id: i as u64,
                    ideal_candidates: vec![1_000_000],
                    origin: Origin::Coinmail,
                    rows: rows
                        .into_iter()
                        .enumerate()
                        .map(|(j, (grade, features))| LabeledRow {
                            member_id: j as u64,
                            grade: Grade(grade),
                            features,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn learns_separable_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lists: Vec<Vec<(u8, Vec<f64>)>> = (0..40)
            .map(|_| {
                (0..20)
                    .map(|_| {
                        let grade = [0u8, 2, 5][rng.random_range(0..3)];
                        let signal = f64::from(grade) / 5.0;
                        (grade, vec![rng.random(), signal, rng.random()])
                    })
                    .collect()
            })
            .collect();
        let data = dataset(lists, &["noise1", "signal", "noise2"]);
        let empty = Dataset {
            registry: data.registry.clone(),
            lists: vec![],
        };
        let cfg = TrainConfig::default();
        let out = train_coordinate_ascent(&data, &empty, &cfg).unwrap();
        let meta = out.model.metadata.as_ref().unwrap();
        assert!(meta.train_ndcg >= 0.99, "{meta:?}");
        for run in &out.runs {
            assert!(run.history.windows(2).all(|w| w[1] >= w[0]));
            assert!(run.sweeps <= cfg.sweeps_max);
        }
        let again = train_coordinate_ascent(&data, &empty, &cfg).unwrap();
        assert_eq!(again.model, out.model);
    }

    #[test]
    fn rejects_inconsistent_registries() {
        let a = dataset(vec![vec![(5, vec![1.0, 0.0]), (0, vec![0.0, 1.0])]], &["x", "y"]);
        let b = dataset(vec![vec![(5, vec![1.0]), (0, vec![0.0])]], &["x"]);
        let cfg = TrainConfig::default();
        assert!(matches!(
            train_coordinate_ascent(&a, &b, &cfg),
            Err(Error::RegistryMismatch(_))
        ));
        let ragged = dataset(vec![vec![(5, vec![1.0, 0.0]), (0, vec![0.0])]], &["x", "y"]);
        assert!(matches!(
            train_coordinate_ascent(&ragged, &a, &cfg),
            Err(Error::RegistryMismatch(_))
        ));
    }

    #[test]
    fn evaluate_projects_onto_model_registry() {
        let data = dataset(vec![vec![(0, vec![1.0, 0.0]), (5, vec![0.0, 1.0])]], &["x", "y"]);
        let good = LinearModel::new(Registry::new(&["y"]), vec![1.0]).unwrap();
        assert_eq!(evaluate_model(&good, &data, 5).unwrap(), vec![1.0]);
        let bad = LinearModel::new(Registry::new(&["x"]), vec![1.0]).unwrap();
        assert!(evaluate_model(&bad, &data, 5).unwrap()[0] < 1.0);
        let missing = LinearModel::new(Registry::new(&["z"]), vec![1.0]).unwrap();
        assert!(evaluate_model(&missing, &data, 5).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = LinearModel::new(Registry::baseline(), vec![0.5f64, -0.25, 1.0, 0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        assert_eq!(LinearModel::<f64>::load(&path).unwrap(), m);
    }
}
