//! Output-only modal identification.
//!
//! The pipeline runs from raw multichannel acceleration records to natural
//! frequencies, damping ratios and mode shapes:
//!
//! 1. [`preprocess`]: ingestion, detrending, decimation, zero-phase band
//!    filtering and Welch spectra.
//! 2. [`next`]: unbiased output cross-correlations used as impulse-response-like
//!    sequences, and their transformation into equivalent FRFs.
//! 3. [`loewner`]: tangential Loewner pencil, truncated descriptor
//!    realization and modal extraction.
//! 4. [`stabilize`]: model-order sweep, stability flags, mode consolidation
//!    and MAC matrices.
//!
//! [`era`] provides the NExT-ERA reference route and [`synth`] a ground-truth
//! simulator for proportionally damped MDOF structures.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod era;
pub mod json;
pub mod linalg;
pub mod loewner;
pub mod next;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod stabilize;
pub mod synth;

use nalgebra::Complex;

/// Double precision complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Crate-level error, wrapping the error of the module that failed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("preprocess: {0}")]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error("next: {0}")]
    Next(#[from] next::NextError),
    #[error("loewner: {0}")]
    Loewner(#[from] loewner::LoewnerError),
    #[error("era: {0}")]
    Era(#[from] era::EraError),
    #[error("stabilize: {0}")]
    Stabilize(#[from] stabilize::StabilizeError),
    #[error("synth: {0}")]
    Synth(#[from] synth::SynthError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("report: {0}")]
    Report(#[from] report::ReportError),
}

impl Error {
    /// Module-qualified error code, e.g. `loewner::OrderExceedsRank`.
    pub fn code(&self) -> String {
        fn variant<T: std::fmt::Debug>(e: &T) -> String {
            let dbg = format!("{e:?}");
            dbg.split(|c: char| !c.is_alphanumeric() && c != '_')
                .next()
                .unwrap_or_default()
                .to_string()
        }
        match self {
            Error::Preprocess(e) => format!("preprocess::{}", variant(e)),
            Error::Next(e) => format!("next::{}", variant(e)),
            Error::Loewner(e) => format!("loewner::{}", variant(e)),
            Error::Era(e) => format!("era::{}", variant(e)),
            Error::Stabilize(e) => format!("stabilize::{}", variant(e)),
            Error::Synth(e) => format!("synth::{}", variant(e)),
            Error::Pipeline(e) => format!("pipeline::{}", variant(e)),
            Error::Report(e) => format!("report::{}", variant(e)),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
