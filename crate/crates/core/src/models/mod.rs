//! Generators, discriminator and their shape planning.

pub mod config;
pub mod discriminator;
pub mod generator;
pub mod layers;

pub use config::{shape_plan, NetConfig, ShapePlan, SkipKind, SkipMode};
pub use discriminator::{build_discriminator, DiscOutput, Discriminator};
pub use generator::{
    build_supervise, build_transfer, forward_supervise, forward_transfer, FeatureTaps, GenOutput, Generator, Role,
};
pub use layers::{BatchNorm, Mode, Pass, StatsTrace};
