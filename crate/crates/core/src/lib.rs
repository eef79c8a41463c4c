//! Subsampled private mechanisms for answering adaptively chosen queries.
//!
//! The crate is `no_std` (it needs `alloc`). Randomness is always passed in
//! explicitly; [`SessionRng`] is the generator used throughout the tests and
//! the experiment harness.
//!
//! - [`noise`]: Laplace draws and the exponential mechanism.
//! - [`privacy`]: subsampling amplification, composition, query budgets.
//! - [`sqmech`]: the subsampled Laplace mechanism for statistical queries.
//! - [`scq`]: single-sample counting queries and counting via repeated SCQs.
//! - [`optimize`]: projected gradient descent on a statistical-query gradient oracle.
//! - [`harness`]: known distributions, an overfitting attack and the monitor.
#![no_std]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod data;
pub mod error;
pub mod harness;
pub mod noise;
pub mod optimize;
pub mod privacy;
pub mod scq;
pub mod sqmech;

pub use data::{CountingQuery, Dataset, ElementId, StatQuery};
pub use error::{Checked, Error, Result, Warning};
pub use privacy::{BudgetLedger, PrivacyParams};
pub use sqmech::{AccuracyMode, QueryMechanism, Sampling, SqMechConfig, SqSession, Transcript};

/// Seedable generator used for sessions and trials.
pub type SessionRng = rand_chacha::ChaCha12Rng;
