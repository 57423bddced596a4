//! Gateway Hamiltonian tomography for pseudo-spin networks.
//!
//! The crate simulates spectral measurements on networks restricted to the
//! single-excitation subspace and reconstructs local fields `b_n` and
//! couplings `c_mn` from eigenvalues plus the moduli `|<E_j|n>|` measured on
//! a small set of accessed sites.
//!
//! ```
//! use gateway_tomo::{graph, measurement, reconstruction, spectral, topologies};
//!
//! let g = topologies::path(4);
//! let params = spectral::HamiltonianParams::uniform(&g, 0.3, 1.0).unwrap();
//! let h = spectral::assemble_single_excitation(&g, &params).unwrap();
//! let eig = spectral::eigendecompose(&h).unwrap();
//! let plan = graph::compute_access_plan(&g, None).unwrap();
//! let meas = measurement::measure_exact(&eig, &plan.access_set).unwrap();
//! let result = reconstruction::reconstruct(&g, &plan, &meas, &Default::default()).unwrap();
//! assert!((result.params.coupling(1, 2).unwrap() - 1.0).abs() < 1e-10);
//! ```

pub mod config;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod measurement;
pub mod pipeline;
pub mod reconstruction;
pub mod spectral;
pub mod topologies;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use graph::{Edge, NetworkGraph, NodeId, Sign};
