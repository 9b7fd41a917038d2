//! Ticketed diffusion Monte Carlo (TDMC) and its continuous-time limit.
//!
//! The crate is organised by subsystem:
//!
//! * [`chain`]: step laws, the rescaled random walk, the Euler scheme and the
//!   direct weighted Monte Carlo estimator used as the unbiasedness oracle.
//! * [`tdmc`]: the ticketed branching algorithm itself.
//! * [`fan`]: a sampler for the height/depth truncated Brownian fan.
//! * [`hitting`]: first-passage probabilities of the walk and the function `G`.
//! * [`lp`]: tagged point measures and the boundary-absorbing transport metric.
//! * [`harness`]: configuration, statistics, persistence and the verification suite.
//!
//! Every stochastic routine takes an explicit [`RngStream`]; streams are split by
//! key so that results do not depend on processing order or thread count.

pub mod chain;
pub mod error;
pub mod fan;
pub mod harness;
pub mod hitting;
pub mod lp;
pub mod rng;
pub mod stats;
pub mod tdmc;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use stats::Estimate;
