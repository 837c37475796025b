use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qbe_core::corpus::{Corpus, Dictionaries};
use qbe_core::eval::{compare_models, ModelComparison};
use qbe_core::expertise::{build_expertise, ExpertiseMatrix, FactorizationConfig, SeedWeights, Stage};
use qbe_core::features::Priors;
use qbe_core::label_gen::{load_sessions, save_sessions, Dataset, LabelConfig, SessionKind, SimConfig};
use qbe_core::ltr::{LinearModel, TrainConfig};
use qbe_core::pipeline::{
    correlation_experiment, label_sessions, skill_selection_experiment, train_models, LabeledData, World, BASELINE_1,
    BASELINE_2, FULL_MODEL,
};
use qbe_core::synth::{synth_priors, SynthConfig, Synthesizer, Taxonomy};
use qbe_core::text::StopWords;
use qbe_service::{AppState, SnapshotSource};

/// Query-by-example search: data generation, training, evaluation and serving.
#[derive(Debug, Parser)]
#[command(name = "qbe", version)]
struct Cli {
    /// Directory every subcommand reads from and writes to.
    #[arg(long, global = true, env = "QBE_DATA_DIR", default_value = "qbe-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus, click priors and the bundled dictionaries.
    GenerateCorpus(GenerateArgs),
    /// Compute seed expertise and its densified factorization.
    BuildExpertise(ExpertiseArgs),
    /// Simulate keyword and example search sessions.
    SimulateLogs(SimulateArgs),
    /// Derive featurized training and test lists from the sessions.
    MakeLabels(LabelArgs),
    /// Train the two baselines and the full model by coordinate ascent.
    Train(TrainArgs),
    /// Compare models by NDCG on a labeled test file.
    Evaluate(EvaluateArgs),
    /// Compare expertise-ranked and random skill selection on co-inmail lists.
    SkillSelection(SkillSelectionArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10_000)]
    members: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExpertiseArgs {
    #[arg(long, default_value_t = 16)]
    rank: usize,
    /// Densified scores below this are dropped.
    #[arg(long, default_value_t = 0.3)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    /// Weight of the zero target on unobserved cells.
    #[arg(long, default_value_t = 0.0)]
    unobserved_weight: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Keyword search sessions.
    #[arg(long, default_value_t = 1_000)]
    sessions: usize,
    /// Example searches with randomized result order.
    #[arg(long, default_value_t = 300)]
    example_sessions: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Searchers care only about career-path similarity.
    #[arg(long)]
    career_driven: bool,
}

#[derive(Debug, Args)]
struct LabelArgs {
    #[arg(long, default_value_t = 2)]
    min_inmails: usize,
    /// Ideal candidates per co-inmail list, as `N` or `MIN..MAX`.
    #[arg(long, default_value = "1..3", value_parser = parse_ic_range)]
    ic: (usize, usize),
    #[arg(long, default_value_t = 1)]
    lists_per_session: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 15)]
    cutoff: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    sweeps: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Labeled list file; the randomized test set by default.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model files, named by file stem; the three trained models by default.
    #[arg(long, value_delimiter = ',')]
    models: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5,15,25")]
    cutoffs: Vec<usize>,
    /// Machine-readable report; `<data-dir>/report.json` by default.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SkillSelectionArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "QBE_HOST", default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "QBE_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, env = "QBE_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, env = "QBE_MODEL")]
    model: Option<PathBuf>,
    #[arg(long, env = "QBE_DICTIONARIES")]
    dictionaries: Option<PathBuf>,
    #[arg(long, env = "QBE_EXPERTISE")]
    expertise: Option<PathBuf>,
    #[arg(long, env = "QBE_PRIORS")]
    priors: Option<PathBuf>,
    /// Static web assets served for every non-API path.
    #[arg(long, env = "QBE_STATIC_DIR")]
    static_dir: Option<PathBuf>,
}

fn parse_ic_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(format!("bad range {s:?}"));
    }
    Ok((lo, hi))
}

/// File layout under the data directory.
struct Layout(PathBuf);

impl Layout {
    fn corpus(&self) -> PathBuf {
        self.0.join("corpus.jsonl")
    }
    fn priors(&self) -> PathBuf {
        self.0.join("priors.csv")
    }
    fn dictionaries(&self) -> PathBuf {
        self.0.join("dictionaries")
    }
    fn seed_expertise(&self) -> PathBuf {
        self.0.join("expertise_seed.tsv")
    }
    fn expertise(&self) -> PathBuf {
        self.0.join("expertise.tsv")
    }
    fn sessions(&self) -> PathBuf {
        self.0.join("sessions.jsonl")
    }
    fn labels(&self) -> PathBuf {
        self.0.join("labels")
    }
    fn model(&self, name: &str) -> PathBuf {
        self.0.join("models").join(format!("{name}.json"))
    }

    fn existing(path: PathBuf) -> Option<PathBuf> {
        path.exists().then_some(path)
    }

    fn dicts(&self) -> Result<Dictionaries> {
        match Self::existing(self.dictionaries()) {
            Some(dir) => Ok(Dictionaries::load_dir(&dir)?),
            None => Ok(Dictionaries::bundled()),
        }
    }

    fn corpus_with(&self, dicts: &Dictionaries) -> Result<Corpus> {
        let path = self.corpus();
        let report = Corpus::load(&path, Some(dicts)).with_context(|| "run generate-corpus first")?;
        if !report.errors.is_empty() {
            tracing::warn!("{} corpus lines skipped", report.errors.len());
        }
        Ok(report.corpus)
    }

    fn world(&self) -> Result<World> {
        let dicts = self.dicts()?;
        let corpus = self.corpus_with(&dicts)?;
        let priors = match Self::existing(self.priors()) {
            Some(p) => Priors::load_csv(&p)?,
            None => Priors::new([])?,
        };
        let e0 = match Self::existing(self.seed_expertise()) {
            Some(p) => ExpertiseMatrix::load_tsv(&p, Stage::Seed)?,
            None => ExpertiseMatrix::new(Stage::Seed),
        };
        let e1 = ExpertiseMatrix::load_tsv(&self.expertise(), Stage::Densified)
            .with_context(|| "run build-expertise first")?;
        Ok(World::from_parts(
            dicts,
            Taxonomy::bundled(),
            StopWords::bundled(),
            corpus,
            e0,
            e1,
            priors,
        ))
    }
}

#[derive(Debug, Serialize)]
struct Report {
    test: PathBuf,
    comparison: ModelComparison,
    correlations: Vec<(String, f64)>,
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let dir = Layout(cli.data_dir);
    match cli.command {
        Command::GenerateCorpus(a) => generate(&dir, a),
        Command::BuildExpertise(a) => expertise(&dir, a),
        Command::SimulateLogs(a) => simulate(&dir, a),
        Command::MakeLabels(a) => labels(&dir, a),
        Command::Train(a) => train(&dir, a),
        Command::Evaluate(a) => evaluate(&dir, a),
        Command::SkillSelection(a) => skill_selection(&dir, a),
        Command::Serve(a) => serve(&dir, a),
    }
}

fn generate(dir: &Layout, a: GenerateArgs) -> Result<()> {
    fs::create_dir_all(&dir.0).with_context(|| format!("creating {}", dir.0.display()))?;
    let dicts = Dictionaries::bundled();
    let taxonomy = Taxonomy::bundled();
    let cfg = SynthConfig {
        members: a.members,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let corpus = Synthesizer::new(&dicts, &taxonomy, cfg).corpus();
    corpus.save(&dir.corpus())?;
    synth_priors(&corpus, a.seed).save_csv(&dir.priors())?;
    dicts.write_dir(&dir.dictionaries())?;
    println!("wrote {} members to {}", corpus.len(), dir.corpus().display());
    Ok(())
}

fn expertise(dir: &Layout, a: ExpertiseArgs) -> Result<()> {
    let dicts = dir.dicts()?;
    let corpus = dir.corpus_with(&dicts)?;
    let cfg = FactorizationConfig {
        rank: a.rank,
        regularization: a.lambda,
        iterations: a.iterations,
        threshold: a.threshold,
        rng_seed: a.seed,
        unobserved_weight: a.unobserved_weight,
    };
    let (e0, e1) = build_expertise::<f64>(&corpus, &dicts, SeedWeights::default(), &cfg)?;
    e0.save_tsv(&dir.seed_expertise())?;
    e1.save_tsv(&dir.expertise())?;
    println!("seed cells {}, densified cells {}", e0.len(), e1.len());
    Ok(())
}

fn simulate(dir: &Layout, a: SimulateArgs) -> Result<()> {
    let world = dir.world()?;
    let base = if a.career_driven {
        SimConfig::career_driven()
    } else {
        SimConfig::default()
    };
    let cfg = SimConfig {
        keyword_sessions: a.sessions,
        example_sessions: a.example_sessions,
        seed: a.seed,
        ..base
    };
    let sessions = world.simulator(cfg).simulate_sessions();
    save_sessions(&dir.sessions(), &sessions)?;
    let keyword = sessions.iter().filter(|s| s.kind == SessionKind::Keyword).count();
    println!(
        "wrote {} sessions ({keyword} keyword, {} example) to {}",
        sessions.len(),
        sessions.len() - keyword,
        dir.sessions().display()
    );
    Ok(())
}

fn labels(dir: &Layout, a: LabelArgs) -> Result<()> {
    let world = dir.world()?;
    let sessions = load_sessions(&dir.sessions()).with_context(|| "run simulate-logs first")?;
    let cfg = LabelConfig {
        min_inmails: a.min_inmails,
        min_ic: a.ic.0,
        max_ic: a.ic.1,
        lists_per_session: a.lists_per_session,
        seed: a.seed,
    };
    let data = label_sessions(&world, sessions, &cfg)?;
    data.save_dir(&dir.labels())?;
    for (name, set) in [
        ("keyword train", &data.keyword_train),
        ("keyword valid", &data.keyword_valid),
        ("co-inmail train", &data.coinmail_train),
        ("co-inmail valid", &data.coinmail_valid),
        ("co-inmail test", &data.coinmail_test),
        ("randomized test", &data.randomized_test),
    ] {
        println!("{name:<16} {:>6} lists", set.lists.len());
    }
    Ok(())
}

fn train(dir: &Layout, a: TrainArgs) -> Result<()> {
    let data = LabeledData::load_dir(&dir.labels()).with_context(|| "run make-labels first")?;
    let cfg = TrainConfig {
        ndcg_cutoff: a.cutoff,
        rng_seed: a.seed,
        sweeps_max: a.sweeps,
        restarts: a.restarts,
        ..TrainConfig::default()
    };
    let models = train_models(&data, &cfg)?;
    fs::create_dir_all(dir.0.join("models"))?;
    for (name, m) in [(BASELINE_1, &models.baseline1), (BASELINE_2, &models.baseline2), (FULL_MODEL, &models.full)] {
        m.save(&dir.model(name))?;
        let meta = m.metadata.as_ref();
        println!(
            "{name:<12} train NDCG@{} {:.4}  valid {:.4}  -> {}",
            a.cutoff,
            meta.map_or(f64::NAN, |m| m.train_ndcg),
            meta.map_or(f64::NAN, |m| m.valid_ndcg),
            dir.model(name).display()
        );
    }
    Ok(())
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn evaluate(dir: &Layout, a: EvaluateArgs) -> Result<()> {
    let test_path = a.test.unwrap_or_else(|| dir.labels().join("randomized_test.jsonl"));
    let test: Dataset<f64> = Dataset::load(&test_path)?;
    let paths = if a.models.is_empty() {
        [BASELINE_1, BASELINE_2, FULL_MODEL].map(|n| dir.model(n)).to_vec()
    } else {
        a.models
    };
    let models = paths
        .iter()
        .map(|p| Ok((model_name(p), LinearModel::load(p)?)))
        .collect::<Result<Vec<(String, LinearModel<f64>)>>>()?;
    let named: Vec<(String, &LinearModel<f64>)> = models.iter().map(|(n, m)| (n.clone(), m)).collect();
    let comparison = compare_models(&named, &test, &a.cutoffs)?;
    println!("{} lists from {}", comparison.lists, test_path.display());
    println!("{}", comparison.table());
    let correlations = correlation_experiment(&test);
    println!("feature/grade correlation");
    for (name, r) in &correlations {
        println!("  {name:<20} {r:>8.4}");
    }
    let report_path = a.report.unwrap_or_else(|| dir.0.join("report.json"));
    let report = Report {
        test: test_path,
        comparison,
        correlations,
    };
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!("report: {}", report_path.display());
    Ok(())
}

fn skill_selection(dir: &Layout, a: SkillSelectionArgs) -> Result<()> {
    let world = dir.world()?;
    let data = LabeledData::load_dir(&dir.labels()).with_context(|| "run make-labels first")?;
    let lists: Vec<_> = [&data.coinmail_train, &data.coinmail_valid, &data.coinmail_test]
        .into_iter()
        .flat_map(|d| d.lists.iter().cloned())
        .collect();
    let r = skill_selection_experiment(&world, &lists, a.k, a.seed)?;
    println!("{} cases", r.cases);
    println!("Top-{}  {:.4}", a.k, r.top_k);
    println!("Rand-{} {:.4}", a.k, r.rand_k);
    Ok(())
}

fn serve(dir: &Layout, a: ServeArgs) -> Result<()> {
    let or_default = |given: Option<PathBuf>, fallback: PathBuf| given.or_else(|| Layout::existing(fallback));
    let source = SnapshotSource {
        corpus: a.corpus.unwrap_or_else(|| dir.corpus()),
        model: or_default(a.model, dir.model(FULL_MODEL)),
        dictionaries: or_default(a.dictionaries, dir.dictionaries()),
        expertise: or_default(a.expertise, dir.expertise()),
        priors: or_default(a.priors, dir.priors()),
        stopwords: None,
    };
    if !source.corpus.exists() {
        bail!("corpus {} not found", source.corpus.display());
    }
    let state = Arc::new(AppState::from_source(source)?);
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(qbe_service::serve(addr, state, a.static_dir.as_deref()))?;
    Ok(())
}
