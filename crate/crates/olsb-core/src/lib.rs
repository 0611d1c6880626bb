//! Core library for a time-slotted multihop wireless-network routing
//! simulator built around online learning for combined shortest-path and
//! backpressure routing.
//!
//! The simulator models a directed network whose link weights are drawn
//! i.i.d. per slot from unknown per-link distributions on `[0, 1]`. Traffic
//! flows inject Poisson packet arrivals at source nodes; a per-flow learner
//! selects a cost budget for each slot's arrivals by minimizing a
//! queue-aware UCB index over a barycentric spanner of the flow's loop-free
//! paths, and packets then travel hop-by-hop under a budget-constrained
//! backpressure policy. A genie policy with full knowledge of the link
//! means provides the regret baseline.
//!
//! Module map:
//!
//! - [`topology`]: directed graphs, loop-free path enumeration, grid builder.
//! - [`link_model`]: per-link weight distributions and slot sampling.
//! - [`spanner`]: barycentric spanner construction over path incidence
//!   vectors.
//! - [`queueing`]: multi-level per-destination packet queues and the cost
//!   quantization map.
//! - [`qucb`]: per-flow path statistics, the queue-UCB selection rule, and
//!   the genie rule.
//! - [`backpressure`]: budget-feasible backpressure forwarding.
//! - [`sim`]: the slot loop binding everything, plus baseline routers.
//! - [`analytics`]: regret accounting, the regret upper-bound evaluation,
//!   and run summaries.
//! - [`config`]: JSON experiment configuration and validation.
//! - [`sweep`]: experiment sweep expansion and (optionally parallel)
//!   execution.

pub mod analytics;
pub mod backpressure;
pub mod config;
pub mod error;
pub mod linalg;
pub mod link_model;
pub mod qucb;
pub mod queueing;
pub mod rng;
pub mod sha1;
pub mod sim;
pub mod spanner;
pub mod sweep;
pub mod topology;

pub use error::Error;
