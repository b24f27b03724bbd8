//! Minimum distance between smooth parametric submanifolds of R^N.
//!
//! Two material points, each confined to its own surface, attract each other
//! through a potential of their separation and lose energy through Rayleigh
//! damping. Their motion is a damped natural mechanical system on the product
//! of the two surfaces, and it settles at an equilibrium where the separation
//! vector is a common normal: a (local) closest-point pair.
//!
//! * [`manifold`]: surface definitions, jets, the JSON surface format
//! * [`geometry`]: induced metrics, Christoffel symbols, product metric
//! * [`dynamics`]: potential, dissipation, vector field, RK4, energy
//! * [`solver`]: convergence tests, single and multi-start solves
//! * [`oracle`]: brute-force grid search and finite-difference gradient checks
//! * [`cli`]: problem documents and the command-line front end

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod manifold;
pub mod oracle;
pub mod solver;

pub use dynamics::{DissipationModel, MechanicalSystem, Potential, PotentialKind, ProductState};
pub use error::{Error, Result, Side};
pub use manifold::{ParamRange, SurfaceDefinition, SurfaceJet};
pub use solver::{multi_start, solve, SolveResult, SolverConfig};

