//! Entropy analysis for multi-channel sensor data.
//!
//! The pipeline pools raw sensor tables ([`ingest`]), quantizes each channel
//! into histogram bins ([`quantize`]), and measures unpredictability through
//! the Rényi family: max-entropy H₀, Shannon H₁, collision H₂ and min-entropy
//! H∞ ([`entropy`]). Joint distributions over many channels are approximated
//! by Chow-Liu trees ([`chowliu`]) whose entropies are computed by message
//! passing instead of enumerating the joint state space. [`sweep`] runs the
//! approximation over every channel combination, [`dependence`] reports
//! pairwise redundancy, and [`guesswork`] turns min-entropy into attacker
//! effort. [`synth`] produces exact tree-factored models used as oracles.
//!
//! All logarithms are base 2 and every entropy is reported in bits.

pub mod chowliu;
mod contingency;
pub mod dependence;
pub mod entropy;
mod error;
pub mod guesswork;
pub mod ingest;
mod numeric;
pub mod quantize;
pub mod report;
pub mod sweep;
pub mod synth;

pub use chowliu::{build_tree, tree_profile, validate, ChowLiuModel, ValidationReport};
pub use entropy::{joint_direct, profile, profile_joint, renyi, EntropyProfile, SparseJointPmf};
pub use error::{Error, Result};
pub use ingest::{load_table, DatasetManifest, SampleTable};
pub use quantize::{bin_channel, pmf_of, BinRule, BinnedChannel, BinningSpec, Pmf};
