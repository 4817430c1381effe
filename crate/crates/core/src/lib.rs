//! Retrieval-guided, evidence-based classification over embedding vectors.
//!
//! A query is classified against text anchors ([`zeroshot`]) or from its
//! nearest reference cases ([`retrieval`], [`evidence`]), and the result is
//! rendered as a [`report`] that lists the evidence it used.

pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod evidence;
pub mod numerics;
pub mod report;
pub mod retrieval;
pub mod zeroshot;

pub use error::{Error, Result};
