//! Campaign engine for literature-driven, robot-style materials discovery.
//!
//! A campaign turns a free-text requirement into search keywords, retrieves
//! and scores articles, mines candidate reagents, waits for a researcher to
//! approve an ingredient set, then runs rounds of batch Bayesian
//! optimization against an evaluator (the virtual colorimetric lab by
//! default). Language-model calls go through [`gateway`], which ships a
//! scripted mock so every stage runs offline and deterministically.
//!
//! The numerical pieces live in [`labloop_core`], re-exported as [`core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod campaign;
pub mod cli;
pub mod evaluator;
pub mod gateway;
pub mod literature;
pub mod miner;
mod parallel;

pub use labloop_core as core;
