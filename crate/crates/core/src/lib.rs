//! Auto-encoder guided GAN for glyph style transfer.
//!
//! The crate is self-contained: [`tensor`] is a small reverse-mode autodiff
//! engine over dense NCHW tensors, [`glyph`] handles binary glyph images and
//! synthetic paired corpora, [`models`] builds the supervise network, the
//! transfer network and the conditional discriminator, and [`training`]
//! assembles the losses, runs joint optimization and persists checkpoints.

pub mod checks;
pub mod error;
pub mod glyph;
pub mod models;
pub mod parallel;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{ParamId, ParamStore, Real, Tape, Tensor, Var};
