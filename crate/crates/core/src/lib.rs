// SPDX-License-Identifier: Apache-2.0

//! Multi-receiver authentication codes built on pseudo-symplectic geometry
//! over GF(2^k).

pub mod field;
pub mod linalg;
pub mod mracode;
pub mod psgeom;
pub mod rng;
pub mod census;
pub mod cli;
