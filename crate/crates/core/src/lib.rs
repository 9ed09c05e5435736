// SPDX-License-Identifier: Apache-2.0

//! Static malware clustering from fuzzy hashes.
//!
//! The pipeline computes SSDeep, TLSH and IMPHash digests of executables,
//! turns them into fixed-length feature vectors, clusters them with K-Means
//! and grades the clusters with silhouette analysis and family labels.

pub mod similarity;
pub mod pe;
pub mod features;
pub mod clustering;
pub mod corpus;
pub mod io;
pub mod cli;
