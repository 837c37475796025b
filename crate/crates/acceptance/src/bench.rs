//! The synthetic benchmark: one generated world and simulation per seed.

use qbe_core::eval::ModelComparison;
use qbe_core::features::Registry;
use qbe_core::label_gen::{LabelConfig, SimConfig};
use qbe_core::ltr::{train_coordinate_ascent, RunTrace, TrainConfig};
use qbe_core::pipeline::{
    compare_trained, simulate_and_label, skill_selection_experiment, LabeledData, SkillSelectionReport,
    TrainedModels, World, WorldConfig,
};
use qbe_core::Result;

pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const MEMBERS: usize = 10_000;
pub const SELECTED_SKILLS: usize = 10;

pub fn world(seed: u64) -> Result<World> {
    World::generate(&WorldConfig::with_members(MEMBERS, seed))
}

pub fn label_config(seed: u64) -> LabelConfig {
    LabelConfig {
        seed,
        ..LabelConfig::default()
    }
}

pub fn sim_config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        ..SimConfig::default()
    }
}

pub fn train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        rng_seed: seed,
        ..TrainConfig::default()
    }
}

/// Same models as [`qbe_core::pipeline::train_models`], keeping every run trace.
pub fn train_traced(data: &LabeledData, cfg: &TrainConfig) -> Result<(TrainedModels, Vec<RunTrace<f64>>)> {
    let base = Registry::baseline();
    let b1 = train_coordinate_ascent(&data.keyword_train.project(&base)?, &data.keyword_valid.project(&base)?, cfg)?;
    let b2 = train_coordinate_ascent(&data.coinmail_train.project(&base)?, &data.coinmail_valid.project(&base)?, cfg)?;
    let full = train_coordinate_ascent(&data.coinmail_train, &data.coinmail_valid, cfg)?;
    let runs = [&b1, &b2, &full].iter().flat_map(|t| t.runs.iter().cloned()).collect();
    Ok((
        TrainedModels {
            baseline1: b1.model,
            baseline2: b2.model,
            full: full.model,
        },
        runs,
    ))
}

/// What the criteria need from one seed.
pub struct SeedResult {
    pub seed: u64,
    pub searches: usize,
    pub skill_selection: SkillSelectionReport,
    pub comparison: ModelComparison,
    pub runs: Vec<RunTrace<f64>>,
    pub models: TrainedModels,
}

/// Simulates, labels, trains and evaluates one seed of `world`.
pub fn run_seed(world: &World, seed: u64) -> Result<(SeedResult, LabeledData)> {
    let data = simulate_and_label(world, &sim_config(seed), &label_config(seed))?;
    let searches = data.sessions.len();
    let coinmail: Vec<_> = [&data.coinmail_train, &data.coinmail_valid, &data.coinmail_test]
        .into_iter()
        .flat_map(|d| d.lists.iter().cloned())
        .collect();
    let skill_selection = skill_selection_experiment(world, &coinmail, SELECTED_SKILLS, seed)?;
    let (models, runs) = train_traced(&data, &train_config(seed))?;
    let comparison = compare_trained(&models, &data.randomized_test, &[5, 15, 25])?;
    Ok((
        SeedResult {
            seed,
            searches,
            skill_selection,
            comparison,
            runs,
            models,
        },
        data,
    ))
}
