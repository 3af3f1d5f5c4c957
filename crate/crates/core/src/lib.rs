//! Finite-volume simulation and analysis of a two-species, two-stimuli
//! chemotaxis system on a rectangle with no-flux boundaries:
//!
//! ```text
//! u_t    = ∇·(∇u − χ₁ u ∇v)
//! τ₁ v_t = Δv − v + w
//! w_t    = ∇·(∇w − χ₂ w ∇z − χ₃ w ∇v)
//! τ₂ z_t = Δz − z + u
//! ```
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are what the command-line tools use.

pub mod constants;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod helmholtz;
pub mod model;
pub mod regimes;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Domain, Field};
pub use helmholtz::{solve_helmholtz, Backend, Helmholtz};
pub use model::{DerivedParams, DomainConstant, ModelParams, NormalizedState, Provenance, Regime, SimState};
pub use scalar::Real;
pub use solver::{BlowupReport, PositivityMode, RunOutput, RunStatus, Solver, SolverConfig};

pub type Domain64 = Domain<f64>;
pub type Field64 = Field<f64>;
pub type SimState64 = SimState<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type DerivedParams64 = DerivedParams<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type Solver64 = Solver<f64>;

pub type Domain32 = Domain<f32>;
pub type Field32 = Field<f32>;
pub type SimState32 = SimState<f32>;
