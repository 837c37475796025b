//! End-to-end batch jobs over a synthetic world: corpus, expertise,
//! sessions, labels, featurization, training and the offline experiments.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dictionaries, MemberId, MemberProfile};
use crate::error::{Error, Result};
use crate::eval::{
    compare_models, feature_label_correlation, rand_k_selector, rank_correlations, skill_selection_accuracy,
    top_k_selector, ModelComparison, SkillSelectionCase,
};
use crate::expertise::{build_expertise, ExpertiseMatrix, FactorizationConfig, SeedWeights};
use crate::features::{FeatureContext, Priors, ProfileCache, Registry};
use crate::label_gen::{
    derive_keyword_labels, derive_randomized_labels, make_coinmail_lists, Dataset, LabelConfig, LabeledList,
    Origin, Session, SessionKind, SessionSplit, SimConfig, Simulator, Split,
};
use crate::ltr::{train_coordinate_ascent, Grade, GradeScheme, LinearModel, TrainConfig};
use crate::query_builder::{build_query, BuilderConfig, QueryContext, StructuredQuery};
use crate::retrieval::InvertedIndex;
use crate::synth::{stream_rng, synth_priors, SynthConfig, Synthesizer, Taxonomy};
use crate::text::StopWords;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldConfig {
    pub synth: SynthConfig,
    pub seed_weights: SeedWeights,
    pub factorization: FactorizationConfig,
}

impl WorldConfig {
    pub fn with_members(members: usize, seed: u64) -> Self {
        let mut cfg = WorldConfig::default();
        cfg.synth.members = members;
        cfg.synth.seed = seed;
        cfg.factorization.rng_seed = seed;
        cfg
    }
}

/// Everything the batch jobs and the service read.
pub struct World {
    pub dicts: Dictionaries,
    pub taxonomy: Taxonomy,
    pub stopwords: StopWords,
    pub corpus: Corpus,
    pub seed_expertise: ExpertiseMatrix<f64>,
    pub expertise: ExpertiseMatrix<f64>,
    pub priors: Priors,
    pub index: InvertedIndex,
    pub profiles: ProfileCache<f64>,
}

impl World {
    pub fn generate(cfg: &WorldConfig) -> Result<Self> {
        let dicts = Dictionaries::bundled();
        let taxonomy = Taxonomy::bundled();
        let corpus = Synthesizer::new(&dicts, &taxonomy, cfg.synth.clone()).corpus();
        let priors = synth_priors(&corpus, cfg.synth.seed);
        Self::assemble(dicts, taxonomy, StopWords::bundled(), corpus, priors, cfg)
    }

    pub fn assemble(
        dicts: Dictionaries,
        taxonomy: Taxonomy,
        stopwords: StopWords,
        corpus: Corpus,
        priors: Priors,
        cfg: &WorldConfig,
    ) -> Result<Self> {
        let (seed_expertise, expertise) = build_expertise(&corpus, &dicts, cfg.seed_weights, &cfg.factorization)?;
        Ok(Self::from_parts(dicts, taxonomy, stopwords, corpus, seed_expertise, expertise, priors))
    }

    pub fn from_parts(
        dicts: Dictionaries,
        taxonomy: Taxonomy,
        stopwords: StopWords,
        corpus: Corpus,
        seed_expertise: ExpertiseMatrix<f64>,
        expertise: ExpertiseMatrix<f64>,
        priors: Priors,
    ) -> Self {
        let index = InvertedIndex::build(&corpus);
        let profiles = ProfileCache::build(&corpus, &dicts, &stopwords);
        World {
            dicts,
            taxonomy,
            stopwords,
            corpus,
            seed_expertise,
            expertise,
            priors,
            index,
            profiles,
        }
    }

    pub fn feature_context(&self) -> FeatureContext<'_, f64> {
        FeatureContext::new(&self.dicts, &self.expertise, &self.priors, &self.stopwords)
    }

    pub fn simulator(&self, cfg: SimConfig) -> Simulator<'_> {
        Simulator::new(
            &self.corpus,
            &self.dicts,
            &self.taxonomy,
            &self.expertise,
            &self.priors,
            &self.stopwords,
            &self.index,
            &self.profiles,
            cfg,
        )
    }

    fn members(&self, ids: &[MemberId]) -> Result<Vec<&MemberProfile>> {
        ids.iter()
            .map(|&m| self.corpus.get(m).ok_or(Error::UnknownMember(m)))
            .collect()
    }

    pub fn build_query(&self, ideal_candidates: &[MemberId]) -> Result<StructuredQuery<f64>> {
        let ctx = QueryContext::new(self.members(ideal_candidates)?)?;
        Ok(build_query(&ctx, &self.expertise, &self.dicts, &BuilderConfig::default()))
    }

    /// Fills every row with the full feature vector. Keyword lists are
    /// featurized against their session's keyword query, the others against
    /// the query built from their ideal candidates.
    pub fn featurize(&self, lists: &mut [LabeledList<f64>], sessions: &[Session]) -> Result<()> {
        let by_id: HashMap<u64, &Session> = sessions.iter().map(|s| (s.session_id, s)).collect();
        let ctx = self.feature_context();
        lists.par_iter_mut().try_for_each(|l| -> Result<()> {
            let query = match l.origin {
                Origin::Keyword => by_id
                    .get(&l.session_id)
                    .map(|s| s.query.clone())
                    .ok_or_else(|| Error::Invalid(format!("no session {} for keyword list", l.session_id)))?,
                _ => self.build_query(&l.ideal_candidates)?,
            };
            let ics = l
                .ideal_candidates
                .iter()
                .map(|&m| self.profiles.get(m).ok_or(Error::UnknownMember(m)))
                .collect::<Result<Vec<_>>>()?;
            let ex = ctx.extractor(ics, &query);
            for row in &mut l.rows {
                let r = self.profiles.get(row.member_id).ok_or(Error::UnknownMember(row.member_id))?;
                row.features = ex.values(r).to_vec();
            }
            Ok(())
        })
    }
}

/// Labeled lists of one simulation, by role.
#[derive(Debug, Clone)]
pub struct LabeledData {
    pub sessions: Vec<Session>,
    pub keyword_train: Dataset<f64>,
    pub keyword_valid: Dataset<f64>,
    pub coinmail_train: Dataset<f64>,
    pub coinmail_valid: Dataset<f64>,
    pub coinmail_test: Dataset<f64>,
    /// Example searches with randomized results.
    pub randomized_test: Dataset<f64>,
}

impl LabeledData {
    const FILES: [&'static str; 6] = [
        "keyword_train",
        "keyword_valid",
        "coinmail_train",
        "coinmail_valid",
        "coinmail_test",
        "randomized_test",
    ];

    fn sets(&self) -> [&Dataset<f64>; 6] {
        [
            &self.keyword_train,
            &self.keyword_valid,
            &self.coinmail_train,
            &self.coinmail_valid,
            &self.coinmail_test,
            &self.randomized_test,
        ]
    }

    /// Writes one `<set>.jsonl` file per dataset; sessions are not included.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, set) in Self::FILES.iter().zip(self.sets()) {
            set.save(&dir.join(format!("{name}.jsonl")))?;
        }
        Ok(())
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let load = |name: &str| Dataset::load(&dir.join(format!("{name}.jsonl")));
        Ok(LabeledData {
            sessions: Vec::new(),
            keyword_train: load(Self::FILES[0])?,
            keyword_valid: load(Self::FILES[1])?,
            coinmail_train: load(Self::FILES[2])?,
            coinmail_valid: load(Self::FILES[3])?,
            coinmail_test: load(Self::FILES[4])?,
            randomized_test: load(Self::FILES[5])?,
        })
    }
}

/// Simulates sessions and labels them with [`label_sessions`].
pub fn simulate_and_label(world: &World, sim: &SimConfig, labels: &LabelConfig) -> Result<LabeledData> {
    let sessions = world.simulator(sim.clone()).simulate_sessions();
    label_sessions(world, sessions, labels)
}

/// Turns sessions into featurized lists. Keyword sessions are split into
/// train, validation and test; every example session goes to the randomized
/// test set.
pub fn label_sessions(world: &World, sessions: Vec<Session>, labels: &LabelConfig) -> Result<LabeledData> {
    let scheme = GradeScheme::default();
    let keyword: Vec<&Session> = sessions.iter().filter(|s| s.kind == SessionKind::Keyword).collect();
    let split = SessionSplit::default_ratios(keyword.iter().map(|s| s.session_id), labels.seed);

    let mut keyword_lists: Vec<LabeledList<f64>> = keyword
        .iter()
        .map(|s| derive_keyword_labels(s, &scheme))
        .filter(|l| l.rows.iter().any(|r| r.grade > Grade::IRRELEVANT))
        .collect();
    let mut coinmail = make_coinmail_lists(&sessions, labels)?;
    let mut randomized: Vec<LabeledList<f64>> = sessions
        .iter()
        .filter_map(|s| derive_randomized_labels(s, &scheme))
        .collect();
    world.featurize(&mut keyword_lists, &sessions)?;
    world.featurize(&mut coinmail, &sessions)?;
    world.featurize(&mut randomized, &sessions)?;

    let full = Registry::full();
    let ds = |lists: Vec<LabeledList<f64>>| Dataset::new(full.clone(), lists);
    Ok(LabeledData {
        keyword_train: ds(split.select(&keyword_lists, Split::Train)),
        keyword_valid: ds(split.select(&keyword_lists, Split::Valid)),
        coinmail_train: ds(split.select(&coinmail, Split::Train)),
        coinmail_valid: ds(split.select(&coinmail, Split::Valid)),
        coinmail_test: ds(split.select(&coinmail, Split::Test)),
        randomized_test: ds(randomized),
        sessions,
    })
}

pub const BASELINE_1: &str = "baseline-1";
pub const BASELINE_2: &str = "baseline-2";
pub const FULL_MODEL: &str = "full";

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub baseline1: LinearModel<f64>,
    pub baseline2: LinearModel<f64>,
    pub full: LinearModel<f64>,
}

/// Baseline 1: keyword lists, baseline features. Baseline 2: co-inmail
/// lists, baseline features. Full: co-inmail lists, every feature.
pub fn train_models(data: &LabeledData, cfg: &TrainConfig) -> Result<TrainedModels> {
    let base = Registry::baseline();
    let b1 = train_coordinate_ascent(&data.keyword_train.project(&base)?, &data.keyword_valid.project(&base)?, cfg)?;
    let b2 = train_coordinate_ascent(&data.coinmail_train.project(&base)?, &data.coinmail_valid.project(&base)?, cfg)?;
    let full = train_coordinate_ascent(&data.coinmail_train, &data.coinmail_valid, cfg)?;
    Ok(TrainedModels {
        baseline1: b1.model,
        baseline2: b2.model,
        full: full.model,
    })
}

pub fn compare_trained(models: &TrainedModels, test: &Dataset<f64>, cutoffs: &[usize]) -> Result<ModelComparison> {
    compare_models(
        &[
            (BASELINE_1.to_string(), &models.baseline1),
            (BASELINE_2.to_string(), &models.baseline2),
            (FULL_MODEL.to_string(), &models.full),
        ],
        test,
        cutoffs,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSelectionReport {
    pub cases: usize,
    pub top_k: f64,
    pub rand_k: f64,
}

/// Skill-selection cases from co-inmail lists: inmailed rows are relevant,
/// every other row non-relevant. Lists lacking either are skipped.
pub fn skill_selection_experiment(
    world: &World,
    lists: &[LabeledList<f64>],
    k: usize,
    seed: u64,
) -> Result<SkillSelectionReport> {
    let mut top = Vec::new();
    let mut rand = Vec::new();
    for l in lists {
        let relevant: Vec<MemberId> = l.rows.iter().filter(|r| r.grade == Grade::RELEVANT).map(|r| r.member_id).collect();
        let nonrelevant: Vec<MemberId> =
            l.rows.iter().filter(|r| r.grade != Grade::RELEVANT).map(|r| r.member_id).collect();
        if relevant.is_empty() || nonrelevant.is_empty() {
            continue;
        }
        let ics = world.members(&l.ideal_candidates)?;
        let mut rng = stream_rng(seed, l.list_id);
        let top_skills = top_k_selector(&ics, k, &world.expertise);
        let Ok(rand_skills) = rand_k_selector(&ics, k, &mut rng) else {
            continue;
        };
        let case = |selected_skills: Vec<u32>| SkillSelectionCase {
            ideal_candidates: l.ideal_candidates.clone(),
            relevant: relevant.clone(),
            nonrelevant: nonrelevant.clone(),
            selected_skills,
        };
        top.push(case(top_skills));
        rand.push(case(rand_skills));
    }
    Ok(SkillSelectionReport {
        cases: top.len(),
        top_k: skill_selection_accuracy(&top, &world.expertise)?,
        rand_k: skill_selection_accuracy(&rand, &world.expertise)?,
    })
}

/// Mean within-list feature/grade correlation, strongest first.
pub fn correlation_experiment(lists: &Dataset<f64>) -> Vec<(String, f64)> {
    rank_correlations(feature_label_correlation(lists))
}
