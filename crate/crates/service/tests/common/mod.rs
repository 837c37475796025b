#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use qbe_core::features::Registry;
use qbe_core::ltr::LinearModel;
use qbe_core::pipeline::{World, WorldConfig};
use qbe_service::{AppState, Snapshot};

pub const MEMBERS: usize = 1_500;

pub fn world() -> World {
    World::generate(&WorldConfig::with_members(MEMBERS, 5)).expect("world builds")
}

/// Uniform weights over every feature.
pub fn uniform_model() -> LinearModel<f64> {
    LinearModel::uniform(Registry::full())
}

pub fn snapshot() -> &'static Snapshot {
    static S: OnceLock<Snapshot> = OnceLock::new();
    S.get_or_init(|| Snapshot::new(world(), uniform_model(), "test-1").unwrap())
}

pub fn state() -> Arc<AppState> {
    static S: OnceLock<Arc<AppState>> = OnceLock::new();
    S.get_or_init(|| Arc::new(AppState::new(Snapshot::new(world(), uniform_model(), "test-1").unwrap())))
        .clone()
}
