use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use qbe_core::corpus::{Corpus, Dictionaries};
use qbe_core::expertise::{ExpertiseMatrix, Stage};
use qbe_core::features::{Priors, Registry};
use qbe_core::ltr::LinearModel;
use qbe_core::pipeline::{World, WorldConfig};
use qbe_core::query_builder::BuilderConfig;
use qbe_core::synth::Taxonomy;
use qbe_core::text::StopWords;
use qbe_core::{Error, Result};

/// Everything one response is computed from.
pub struct Snapshot {
    pub version: String,
    pub world: World,
    pub model: LinearModel<f64>,
    pub builder: BuilderConfig,
    /// Full-registry column of each model weight.
    columns: Vec<usize>,
}

impl Snapshot {
    /// Fails when the model uses a feature outside the full registry.
    pub fn new(world: World, model: LinearModel<f64>, version: impl Into<String>) -> Result<Self> {
        let columns = Registry::full().projection(&model.registry)?;
        Ok(Snapshot {
            version: version.into(),
            world,
            model,
            builder: BuilderConfig::default(),
            columns,
        })
    }

    /// Model score of a full feature vector.
    pub fn score(&self, full: &[f64; 9]) -> f64 {
        self.model
            .weights
            .iter()
            .zip(&self.columns)
            .map(|(w, &c)| w * full[c])
            .sum()
    }
}

/// Files a snapshot is loaded from. Only the corpus is required.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSource {
    pub corpus: PathBuf,
    /// Uniform weights over the full registry when absent.
    pub model: Option<PathBuf>,
    /// Directory of `<kind>.json` dictionaries; the bundled set when absent.
    pub dictionaries: Option<PathBuf>,
    /// Densified expertise TSV; recomputed from the corpus when absent.
    pub expertise: Option<PathBuf>,
    /// `member_id,ctr` CSV; every prior is 0 when absent.
    pub priors: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
}

impl SnapshotSource {
    pub fn load(&self, version: impl Into<String>) -> Result<Snapshot> {
        let dicts = match &self.dictionaries {
            Some(dir) => Dictionaries::load_dir(dir)?,
            None => Dictionaries::bundled(),
        };
        let stopwords = match &self.stopwords {
            Some(p) => StopWords::load(p)?,
            None => StopWords::bundled(),
        };
        let report = Corpus::load(&self.corpus, Some(&dicts))?;
        for e in report.errors.iter().take(10) {
            tracing::warn!(line = e.line, "skipped corpus line: {}", e.message);
        }
        if report.errors.len() > 10 {
            tracing::warn!("{} corpus lines skipped in total", report.errors.len());
        }
        let corpus = report.corpus;
        if corpus.is_empty() {
            return Err(Error::Empty("corpus"));
        }
        let priors = match &self.priors {
            Some(p) => Priors::load_csv(p)?,
            None => Priors::new([])?,
        };
        let taxonomy = Taxonomy::bundled();
        let world = match &self.expertise {
            Some(p) => {
                let e1 = ExpertiseMatrix::load_tsv(p, Stage::Densified)?;
                World::from_parts(dicts, taxonomy, stopwords, corpus, ExpertiseMatrix::new(Stage::Seed), e1, priors)
            }
            None => World::assemble(dicts, taxonomy, stopwords, corpus, priors, &WorldConfig::default())?,
        };
        let model = match &self.model {
            Some(p) => LinearModel::load(p)?,
            None => {
                tracing::warn!("no model file given; ranking with uniform weights");
                LinearModel::uniform(Registry::full())
            }
        };
        Snapshot::new(world, model, version)
    }
}

/// The current snapshot, replaced atomically.
pub struct AppState {
    current: RwLock<Arc<Snapshot>>,
    source: Option<SnapshotSource>,
    loads: AtomicU64,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        AppState {
            current: RwLock::new(Arc::new(snapshot)),
            source: None,
            loads: AtomicU64::new(1),
        }
    }

    /// Loads version `v1` from `source` and remembers it for [`AppState::reload`].
    pub fn from_source(source: SnapshotSource) -> Result<Self> {
        let snapshot = source.load("v1")?;
        Ok(AppState {
            current: RwLock::new(Arc::new(snapshot)),
            source: Some(source),
            loads: AtomicU64::new(1),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Installs `next` and returns the snapshot it replaced. Requests holding
    /// the old one finish on it.
    pub fn swap(&self, next: Snapshot) -> Arc<Snapshot> {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, Arc::new(next))
    }

    /// Reloads every file of the configured source under a new version.
    pub fn reload(&self) -> Result<Arc<Snapshot>> {
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| Error::Config("no snapshot source to reload from".into()))?;
        let n = self.loads.fetch_add(1, Ordering::SeqCst) + 1;
        let next = source.load(format!("v{n}"))?;
        self.swap(next);
        Ok(self.snapshot())
    }
}
