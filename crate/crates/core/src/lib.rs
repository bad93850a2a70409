//! Prompt-driven industrial anomaly detection.
//!
//! A multimodal foundation model is turned into an anomaly detector purely
//! through a layered prompt template (task, context, expertise, output and
//! optional reference samples). Around that sit the pieces needed to run and
//! judge it reproducibly:
//!
//! - [`prompt`]: template sections, presets, composition and version store.
//! - [`client`]: chat-completions transport, verdict parsing, record/replay cache.
//! - [`refine`]: the pre-processor loop that turns expert notes into template edits.
//! - [`features`]: slope / area features of 500-point crimp force curves.
//! - [`forest`]: Isolation Forest baseline with contamination thresholding.
//! - [`eval`]: metrics, ablation runs, ramp-up benchmark, holdout thresholding, reports.
//! - [`dataset`]: loaders for the three scenario layouts.
//! - [`experiment`]: the run driver shared by the CLI and the HTTP service.

pub mod client;
pub mod dataset;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod forest;
pub mod label;
pub mod par;
pub mod prompt;
pub mod refine;

pub use label::Label;
pub use par::Execution;
