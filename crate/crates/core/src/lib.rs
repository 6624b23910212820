//! Acousto-electric tomography: forward simulation, synthetic focusing and
//! conductivity reconstruction on the cube [-1,1]^d.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`], [`field`], [`spectral`], [`fd`], [`metrics`], [`io`]: the
//!   numerical substrate (node grids, cosine/sine series derivatives and
//!   Poisson solvers, finite differences, norms, the AETF file format).
//! * [`phantom`]: smoothed-inclusion conductivity phantoms.
//! * [`forward`]: potentials, power densities and boundary functionals.
//! * [`probe`]: acoustic front perturbations and sinogram simulation.
//! * [`focusing`]: inversion of the circular mean data into power densities.
//! * [`recon2d`], [`recon3d`]: linearized and iterative reconstruction.

pub mod error;
pub mod fd;
pub mod field;
pub mod focusing;
pub mod forward;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod probe;
pub mod recon2d;
pub mod recon3d;
pub mod spectral;

pub use error::{AetError, Result};
pub use field::{ScalarField, VectorField};
pub use forward::{CurrentPattern, PotentialSolution};
pub use grid::Grid;
pub use phantom::{PhantomSpec, SmoothedBall};
pub use probe::{Sinogram, TransducerArray};
pub use recon2d::{PerturbationData, ReconOptions, ReconResult};
pub use recon3d::{Mode3D, PerturbationData3D};
