//! Sentiment mining over social-media text about brands and products.
//!
//! The crate follows a four-stage flow: records are collected from paginated
//! JSON endpoints or local files ([`collector`]), cleaned into a deduplicated
//! [`corpus::Corpus`], tokenized into a tf-idf document-term matrix
//! ([`preprocess`]), scored with a merged polarity lexicon ([`lexicon`]) and a
//! multinomial Naive Bayes model bootstrapped from those scores
//! ([`classifier`]), and finally summarised as confusion matrices,
//! distribution tables and histograms ([`evaluate`]). [`pipeline`] wires the
//! stages together behind a declarative config.

pub mod classifier;
pub mod collector;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod json_path;
pub mod lexicon;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};
