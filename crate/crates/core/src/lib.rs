//! Singular-arc extremals for time-optimal control of fully actuated
//! mechanical systems, specialized to a planar two-link arm.
//!
//! The crate builds Pontryagin extremals whose first input is singular, and
//! cleans up externally computed trajectories by replacing the control on
//! detected singular intervals with the closed-form law.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

pub mod arm2dof;
pub mod cli;
pub mod config;
pub mod error;
pub mod integrate;
pub mod io;
pub mod liegeom;
pub mod linalg;
pub mod model;
pub mod pmp;
pub mod regularize;
pub mod scalar;

pub use arm2dof::{Arm2Dof, ArmParams, InertiaCoupling};
pub use error::{Error, Result};
pub use model::{ControlBounds, MechModel, MechState};
pub use scalar::{Dual, Real, Scalar, Tower};

pub type Dual64 = Dual<f64>;
pub type HyperDual64 = Dual<Dual<f64>>;
pub type Dual3_64 = Dual<Dual<Dual<f64>>>;
pub type Dual32 = Dual<f32>;

pub type AlphaTensor64 = liegeom::AlphaTensor<f64>;
pub type AlphaTensor32 = liegeom::AlphaTensor<f32>;
pub type BetaMatrix64 = liegeom::BetaMatrix<f64>;
pub type SwitchingRecord64 = pmp::SwitchingRecord<f64>;
pub type SingularLawCoeffs64 = pmp::SingularLawCoeffs<f64>;
