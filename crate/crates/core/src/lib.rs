//! Node-based verification decoding for compressed sensing over sparse
//! regular bipartite graphs: a finite-length simulator of the Genie, LM, SBB
//! and XH decoders and a density-evolution analyzer for their thresholds.

pub mod cli;
pub mod de;
pub mod decoders;
pub mod graph;
pub mod montecarlo;
pub mod rng;
pub mod signal;
pub mod threshold;

pub use decoders::Algorithm;
