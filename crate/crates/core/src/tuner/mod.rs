//! Closed-loop synchronization of emitters to a common frequency.
//!
//! Each emitter is handled in turn: scan around its last known line, fit,
//! plan a pump burst that covers a fraction of the remaining gap according to
//! the current power-law estimate, fire, and re-scan. The estimate is refined
//! from the observed shifts as the history grows.

mod estimate;
mod plan;
mod run;

pub use estimate::{update_estimate, EmitterEstimate, HistoryPoint};
pub use plan::{choose_target, plan_burst, BurstPlan, TunePlan};
pub use run::{synchronize, tune_one, BurstRecord, CrossTalk, TuneBench, TuneEntry, TuneOutcome, TuneReport};
