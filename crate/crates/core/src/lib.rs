//! Allocation-only algorithms behind the `labloop` campaign engine.
//!
//! Everything here is a pure function of its inputs: the composition
//! simplex, the Gaussian-process surrogate and batch acquisition, the
//! virtual colorimetric lab, CAS check digits and candidate aggregation.
//! File formats, language-model calls and persistence live in the `labloop`
//! crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod acquisition;
pub mod candidates;
pub mod cas;
pub mod domain;
pub mod gp;
pub mod linalg;
pub mod seed;
pub mod sig;
pub mod simplex;
pub mod stats;
pub mod virtlab;

pub use acquisition::{acquire, propose_batch, AcquisitionConfig, ProposeError};
pub use candidates::{aggregate_candidates, curation_digest, CandidateList, Digest, DigestError};
pub use cas::validate_cas;
pub use domain::{
    filter_relevant, normalize_recipe, ArticleRecord, DomainError, Recipe, ResponseCurve, RhProgram, RhStep, Role,
    ScoreBreakdown, Scored, SubstanceRecord,
};
pub use gp::{fit, GpError, HyperGrid, KernelParams, Prediction, SurrogateModel};
pub use simplex::sample_simplex;
