//! Member-skill expertise estimation.
//!
//! A sparse seed matrix is scored from endorsements and textual evidence,
//! factorized into member and skill factors by regularized alternating least
//! squares, then reconstructed and thresholded into a denser matrix. Absent
//! cells mean a score of zero everywhere downstream.
//!
//! By default only observed cells enter the loss. Seed evidence is
//! positive-only, so that loss cannot tell an unrelated skill from an
//! unobserved related one; `unobserved_weight > 0` adds every unobserved cell
//! as a zero target with that weight.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dictionaries, MemberId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Seed,
    Densified,
}

/// Sparse member x skill scores in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertiseMatrix<T> {
    stage: Stage,
    rows: BTreeMap<MemberId, Vec<(u32, T)>>,
    cells: usize,
}

impl<T: Scalar> ExpertiseMatrix<T> {
    pub fn new(stage: Stage) -> Self {
        ExpertiseMatrix {
            stage,
            rows: BTreeMap::new(),
            cells: 0,
        }
    }

    /// Builds from triplets; a repeated pair keeps the last score.
    pub fn from_cells(
        stage: Stage,
        cells: impl IntoIterator<Item = (MemberId, u32, T)>,
    ) -> Result<Self> {
        let mut m = Self::new(stage);
        for (member, skill, score) in cells {
            m.insert(member, skill, score)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, member: MemberId, skill: u32, score: T) -> Result<()> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::Invalid(format!(
                "expertise score {score} for ({member}, {skill}) outside [0, 1]"
            )));
        }
        let row = self.rows.entry(member).or_default();
        match row.binary_search_by_key(&skill, |c| c.0) {
            Ok(i) => row[i].1 = score,
            Err(i) => {
                row.insert(i, (skill, score));
                self.cells += 1;
            }
        }
        Ok(())
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Stored score, or zero for absent cells and unknown ids.
    pub fn expertise_score(&self, member: MemberId, skill: u32) -> T {
        self.get(member, skill).unwrap_or_else(T::zero)
    }

    pub fn get(&self, member: MemberId, skill: u32) -> Option<T> {
        let row = self.rows.get(&member)?;
        row.binary_search_by_key(&skill, |c| c.0).ok().map(|i| row[i].1)
    }

    /// Cells of one member sorted by skill id.
    pub fn row(&self, member: MemberId) -> &[(u32, T)] {
        self.rows.get(&member).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn members(&self) -> impl Iterator<Item = MemberId> + '_ {
        self.rows.keys().copied()
    }

    pub fn skills(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.rows.values().flatten().map(|c| c.0).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (MemberId, u32, T)> + '_ {
        self.rows
            .iter()
            .flat_map(|(&m, row)| row.iter().map(move |&(s, v)| (m, s, v)))
    }

    pub fn len(&self) -> usize {
        self.cells
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    /// Tab-separated `member_id  skill_id  score` lines.
    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (m, s, v) in self.iter() {
                writeln!(w, "{m}\t{s}\t{}", v.as_f64())?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load_tsv(path: &Path, stage: Stage) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .has_headers(false)
            .from_path(path)
            .map_err(|e| Error::parse("expertise file", e))?;
        let mut m = Self::new(stage);
        for rec in reader.deserialize::<(MemberId, u32, f64)>() {
            let (member, skill, score) = rec.map_err(|e| Error::parse("expertise file", e))?;
            m.insert(member, skill, T::of(score))?;
        }
        Ok(m)
    }
}

/// Weights of the seed heuristic; they should sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedWeights {
    pub endorsement: f64,
    pub text: f64,
}

impl Default for SeedWeights {
    fn default() -> Self {
        SeedWeights {
            endorsement: 0.7,
            text: 0.3,
        }
    }
}

/// Seed score of one explicit skill:
/// `clamp(we * ln(1+e)/ln(1+e_max) + wt * t, 0, 1)` where `t` is the
/// fraction of skill-name tokens found in the member's headline or position
/// descriptions.
pub fn seed_score<T: Scalar>(
    endorsements: u32,
    max_endorsements: u32,
    text_fraction: f64,
    w: SeedWeights,
) -> T {
    let endorse = if max_endorsements == 0 {
        0.0
    } else {
        (1.0 + f64::from(endorsements)).ln() / (1.0 + f64::from(max_endorsements)).ln()
    };
    T::of(w.endorsement * endorse + w.text * text_fraction).clamp01()
}

/// Seed matrix with one cell per explicitly listed skill.
pub fn seed_scores<T: Scalar>(
    corpus: &Corpus,
    dicts: &Dictionaries,
    weights: SeedWeights,
) -> ExpertiseMatrix<T> {
    let e_max = corpus.max_endorsements();
    let mut m = ExpertiseMatrix::new(Stage::Seed);
    for p in corpus.profiles() {
        let mut evidence: HashSet<String> = tokens(&p.headline).into_iter().collect();
        for pos in &p.positions {
            evidence.extend(tokens(&pos.description));
        }
        for &(skill, e) in &p.skills {
            let name = tokens(dicts.skill.name(skill).unwrap_or(""));
            let t = if name.is_empty() {
                0.0
            } else {
                name.iter().filter(|w| evidence.contains(*w)).count() as f64 / name.len() as f64
            };
            m.insert(p.member_id, skill, seed_score(e, e_max, t, weights))
                .expect("seed score is clamped");
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationConfig {
    pub rank: usize,
    pub regularization: f64,
    pub iterations: usize,
    pub threshold: f64,
    pub rng_seed: u64,
    /// Weight of the implicit zero target on unobserved cells, in [0, 1].
    #[serde(default)]
    pub unobserved_weight: f64,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        FactorizationConfig {
            rank: 16,
            regularization: 0.05,
            iterations: 20,
            threshold: 0.3,
            rng_seed: 0,
            unobserved_weight: 0.0,
        }
    }
}

impl FactorizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::Config("regularization must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.unobserved_weight) {
            return Err(Error::Config("unobserved_weight must lie in [0, 1]".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factors<T> {
    pub rank: usize,
    pub members: BTreeMap<MemberId, Vec<T>>,
    pub skills: BTreeMap<u32, Vec<T>>,
    /// Regularized squared error after initialization and after every half step.
    pub objective: Vec<T>,
}

impl<T: Scalar> Factors<T> {
    pub fn predict(&self, member: MemberId, skill: u32) -> Option<T> {
        Some(dot(self.members.get(&member)?, self.skills.get(&skill)?))
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major `n x n`)
/// via Cholesky. Returns `None` when `a` is not positive definite.
fn cholesky_solve<T: Scalar>(a: &[T], b: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Some(x)
}

/// Gram matrix `sum v v^T` of a factor set, row-major `k x k`.
fn gram<T: Scalar>(vs: &[Vec<T>], k: usize) -> Vec<T> {
    let mut g = vec![T::zero(); k * k];
    for v in vs {
        for r in 0..k {
            for c in 0..=r {
                g[r * k + c] += v[r] * v[c];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            g[c * k + r] = g[r * k + c];
        }
    }
    g
}

/// Exact minimizer for one row of
/// `sum_obs (e - x.v)^2 + w0 sum_unobs (x.v)^2 + lambda |x|^2`, i.e.
/// `(w0 G + (1 - w0) sum_obs v v^T + lambda I)^-1 sum_obs e v` where `G` is
/// the Gram matrix of all of `other`.
fn solve_row<T: Scalar>(obs: &[(usize, T)], other: &[Vec<T>], k: usize, lambda: T, w0: T, g: &[T]) -> Vec<T> {
    let mut a: Vec<T> = g.iter().map(|&x| w0 * x).collect();
    let mut b = vec![T::zero(); k];
    let w_obs = T::one() - w0;
    for &(j, e) in obs {
        let v = &other[j];
        for r in 0..k {
            b[r] += e * v[r];
            for c in 0..=r {
                a[r * k + c] += w_obs * v[r] * v[c];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            a[c * k + r] = a[r * k + c];
        }
        a[r * k + r] += lambda;
    }
    if let Some(x) = cholesky_solve(&a, &b, k) {
        return x;
    }
    // Singular without regularization: retry with a tiny ridge.
    let jitter = T::of(1e-9);
    for r in 0..k {
        a[r * k + r] += jitter;
    }
    cholesky_solve(&a, &b, k).unwrap_or_else(|| vec![T::zero(); k])
}

struct Observed<T> {
    members: Vec<MemberId>,
    skills: Vec<u32>,
    by_member: Vec<Vec<(usize, T)>>,
    by_skill: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> Observed<T> {
    fn new(e0: &ExpertiseMatrix<T>) -> Self {
        let members: Vec<MemberId> = e0.members().collect();
        let skills = e0.skills();
        let skill_index: BTreeMap<u32, usize> =
            skills.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut by_member = vec![Vec::new(); members.len()];
        let mut by_skill = vec![Vec::new(); skills.len()];
        for (mi, &m) in members.iter().enumerate() {
            for &(s, v) in e0.row(m) {
                let si = skill_index[&s];
                by_member[mi].push((si, v));
                by_skill[si].push((mi, v));
            }
        }
        Observed {
            members,
            skills,
            by_member,
            by_skill,
        }
    }

    fn objective(&self, u: &[Vec<T>], v: &[Vec<T>], lambda: T, w0: T) -> T {
        let (err, obs_sq) = self
            .by_member
            .iter()
            .enumerate()
            .flat_map(|(mi, row)| row.iter().map(move |&(si, e)| (mi, si, e)))
            .map(|(mi, si, e)| {
                let p = dot(&u[mi], &v[si]);
                ((e - p) * (e - p), p * p)
            })
            .fold((T::zero(), T::zero()), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        let mut total = err;
        if w0 > T::zero() {
            let k = v.first().map_or(0, Vec::len);
            let g = gram(v, k);
            let all_sq: T = u
                .iter()
                .map(|x| {
                    (0..k)
                        .map(|r| x[r] * (0..k).map(|c| g[r * k + c] * x[c]).sum::<T>())
                        .sum::<T>()
                })
                .sum();
            total += w0 * (all_sq - obs_sq).max(T::zero());
        }
        let norm: T = u.iter().chain(v).map(|x| dot(x, x)).sum();
        total + lambda * norm
    }
}

/// Regularized alternating least squares on `e0`.
///
/// Minimizes `sum_obs (e - u.v)^2 + w0 sum_unobs (u.v)^2 + lambda (sum |u|^2 +
/// sum |v|^2)` with `w0 = cfg.unobserved_weight`; each half step solves every
/// row exactly, so the objective never increases. Rows are
/// solved in parallel but independently, so the result does not depend on
/// the thread count.
pub fn factorize<T: Scalar>(e0: &ExpertiseMatrix<T>, cfg: &FactorizationConfig) -> Result<Factors<T>> {
    cfg.validate()?;
    if e0.is_empty() {
        return Err(Error::Empty("seed expertise matrix"));
    }
    let obs = Observed::new(e0);
    let k = cfg.rank;
    if k > obs.members.len().min(obs.skills.len()) {
        return Err(Error::RankTooLarge {
            rank: k,
            members: obs.members.len(),
            skills: obs.skills.len(),
        });
    }
    let lambda = T::of(cfg.regularization);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let scale = 1.0 / (k as f64).sqrt();
    let mut init = |n: usize| -> Vec<Vec<T>> {
        (0..n)
            .map(|_| (0..k).map(|_| T::of(rng.random::<f64>() * scale)).collect())
            .collect()
    };
    let mut u = init(obs.members.len());
    let mut v = init(obs.skills.len());

    let w0 = T::of(cfg.unobserved_weight);
    let mut objective = vec![obs.objective(&u, &v, lambda, w0)];
    for _ in 0..cfg.iterations {
        let gv = gram(&v, k);
        u = obs
            .by_member
            .par_iter()
            .map(|row| solve_row(row, &v, k, lambda, w0, &gv))
            .collect();
        objective.push(obs.objective(&u, &v, lambda, w0));
        let gu = gram(&u, k);
        v = obs
            .by_skill
            .par_iter()
            .map(|col| solve_row(col, &u, k, lambda, w0, &gu))
            .collect();
        objective.push(obs.objective(&u, &v, lambda, w0));
    }

    Ok(Factors {
        rank: k,
        members: obs.members.iter().copied().zip(u).collect(),
        skills: obs.skills.iter().copied().zip(v).collect(),
        objective,
    })
}

/// Reconstructs every (member, skill) pair, clamps to [0, 1] and keeps
/// cells at or above the threshold.
pub fn densify<T: Scalar>(factors: &Factors<T>, cfg: &FactorizationConfig) -> ExpertiseMatrix<T> {
    let threshold = T::of(cfg.threshold);
    let skills: Vec<(&u32, &Vec<T>)> = factors.skills.iter().collect();
    let rows: Vec<(MemberId, Vec<(u32, T)>)> = factors
        .members
        .par_iter()
        .map(|(&m, mv)| {
            let row = skills
                .iter()
                .filter_map(|&(&s, sv)| {
                    let score = dot(mv, sv).clamp01();
                    (score >= threshold).then_some((s, score))
                })
                .collect();
            (m, row)
        })
        .collect();
    let mut out = ExpertiseMatrix::new(Stage::Densified);
    for (m, row) in rows {
        if !row.is_empty() {
            out.cells += row.len();
            out.rows.insert(m, row);
        }
    }
    out
}

/// Seed scoring, factorization and densification in one call.
pub fn build_expertise<T: Scalar>(
    corpus: &Corpus,
    dicts: &Dictionaries,
    weights: SeedWeights,
    cfg: &FactorizationConfig,
) -> Result<(ExpertiseMatrix<T>, ExpertiseMatrix<T>)> {
    let seed = seed_scores(corpus, dicts, weights);
    let factors = factorize(&seed, cfg)?;
    let dense = densify(&factors, cfg);
    Ok((seed, dense))
}
