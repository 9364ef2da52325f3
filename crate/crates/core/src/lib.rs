//! Numerical laboratory for finite-time singularities of the Kähler–Ricci flow
//! on projective bundles with Calabi symmetry.
//!
//! The manifold is `P(O ⊕ L^(m+1)) → Z` over an `n`-dimensional Kähler–Einstein
//! base; every invariant metric reduces to a radial potential `φ(ρ)`. See the
//! module docs for the pieces: [`profile`], [`flow`], [`geometry`],
//! [`diagnostics`], [`soliton`] and [`blowup`]. [`config`], [`pipeline`] and
//! [`output`] wire them into runs that write result files.

pub mod banded;
pub mod blowup;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod integrate;
pub mod output;
pub mod pipeline;
pub mod profile;
pub mod soliton;
pub mod stencil;

pub use error::{Error, Result};
pub use flow::{
    class_path, rescale_to_unit_time, run, ClassPath, FlowState, Parametrization, RunRecord,
    SingularityType, StepController,
};
pub use profile::{initial_profile, make_grid, BundleConfig, Grid, KahlerClass, Profile};
