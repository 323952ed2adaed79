//! Binary statutory reasoning (BSR) evaluation.
//!
//! The crate is split along the evaluation pipeline:
//!
//! * [`corpus`] builds prompt corpora from a law / situation / identity config,
//! * [`modelio`] obtains raw model responses (remote endpoints or mocks) with caching,
//! * [`lambda`] maps free-form responses to YES / NO verdicts,
//! * [`metrics`] computes the relative fairness score, F1 and the legal safety score,
//! * [`report`] and [`plot`] serialize reports as JSON, CSV and SVG.

pub mod corpus;
pub mod hashing;
pub mod jsonl;
pub mod lambda;
pub mod metrics;
pub mod modelio;
pub mod plot;
pub mod report;

pub use corpus::{Dataset, IdentityType, Label, PromptInstance, Sample};
pub use lambda::{map_response, ResponseMapper, Verdict, VerdictValue};
pub use metrics::{lss_beta, EvalRecord, MetricsReport};
