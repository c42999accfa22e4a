//! Simulator and analysis library for the mean curvature flow with density of
//! closed spherical curves in rotationally symmetric 3-spaces with split
//! density.
//!
//! The ambient flow decomposes into a radial ODE `R'(t) = −B(R(t))`, a
//! time-changed curve shortening flow with density on a fixed sphere, and a
//! classification of the flow's fate from the two pieces:
//!
//! * [`space`] — the warped ambient space, the split density and the scalar
//!   `B(r) = w'/w + φ'` that drives everything radial.
//! * [`radial`] — adaptive integration of the radius ODE with event detection
//!   and the accumulated time change `t̃(t)`.
//! * [`sphere_flow`] — discrete curve shortening flow with density `ψ` on a
//!   fixed sphere, with diagnostics and singularity detection.
//! * [`composer`] — assembly of the ambient flow from the two components and
//!   the outcome classification.
//! * [`gaussian`] — closed-form solutions for Euclidean space with Gaussian
//!   radial density, the primary validation oracle.
//! * [`cli`] — configuration files, single runs, phase-diagram sweeps and
//!   machine-readable outputs.

pub mod cli;
pub mod composer;
pub mod gaussian;
pub mod radial;
pub mod space;
pub mod sphere_flow;
