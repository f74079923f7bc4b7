//! Validation harness for the risk library: brute-force oracles for the
//! second-order engines, Monte-Carlo scenario simulations that measure
//! the true estimation risk by replication, reference data sets, and a
//! synthetic data generator for the end-to-end pipeline test.

pub mod datasets;
pub mod oracle;
pub mod scenarios;
pub mod winegen;
