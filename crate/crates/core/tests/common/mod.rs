#![allow(dead_code)]

use std::sync::OnceLock;

use qbe_core::pipeline::{World, WorldConfig};

pub const SMALL_WORLD_MEMBERS: usize = 400;

/// A small generated world shared by every test in the binary.
pub fn small_world() -> &'static World {
    static WORLD: OnceLock<World> = OnceLock::new();
    WORLD.get_or_init(|| World::generate(&WorldConfig::with_members(SMALL_WORLD_MEMBERS, 11)).expect("world builds"))
}
