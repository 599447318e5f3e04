pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod sentence_gen;
pub mod svd_filter;
pub mod term_gen;
pub mod vocab;

#[cfg(test)]
mod testutil;
