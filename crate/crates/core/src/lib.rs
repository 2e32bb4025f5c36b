//! Federated training of skip-gram negative-sampling word embeddings.
//!
//! Organizations agree on a shared vocabulary ([`vocab`]), then train a
//! single embedding model by synchronous gradient averaging ([`fed`])
//! without moving their text. [`eval`] covers validation loss, cosine
//! neighbours and embedding files; [`run`] ties it together into
//! reproducible on-disk runs.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fed;
mod io;
pub mod run;
pub mod sgns;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};
pub use io::write_atomic;
