//! Modeling and structural design optimization for multi-magnet embedded
//! soft continuum robots.
//!
//! A slender elastic rod with hard micromagnets fixed along its centerline
//! deforms under an external magnetic field. This crate models such robots
//! with a chain of rigid links coupled by three-degree-of-freedom elastic
//! spherical joints, and provides:
//!
//! - forward kinematics and manipulator Jacobians of the joint chain
//!   ([`kinematics`]),
//! - elastic and magnetic potential energies with analytic gradients and
//!   Hessians ([`energetics`]),
//! - magneto-elastic equilibrium solving with provable uniqueness /
//!   boundedness certificates, compliance, actuation Jacobians and
//!   controllable-DoF analysis ([`equilibrium`]),
//! - differential-geometric performance measures (manipulability,
//!   distortion) integrated over the actuation ball, and their design
//!   gradients with respect to magnet placement ([`perfgeom`]),
//! - placement optimizers: sign-pattern enumeration, projected gradient,
//!   exhaustive landscapes and closed-form two-magnet optima ([`optimizer`]),
//! - independent verification oracles: finite differences, a small-deflection
//!   beam model, Monte-Carlo integration and joint-count convergence
//!   studies ([`oracles`]).
//!
//! Units are SI throughout (m, Pa, T, A·m², N·m, rad). The configuration
//! layer ([`config`]) accepts unit-suffixed quantities ("30 mm", "5 MPa",
//! "10 mT") and converts on ingest.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the thin `mescr` binary exposes the same studies as subcommands driven
//! by a configuration file.

pub mod commands;
pub mod config;
pub mod energetics;
pub mod equilibrium;
pub mod kinematics;
pub mod lie;
pub mod optimizer;
pub mod oracles;
pub mod perfgeom;
pub mod report;
pub mod robot;

pub use energetics::FieldSpec;
pub use equilibrium::{EquilibriumResult, SolveOptions};
pub use robot::{DiscretizedRobot, RobotSpec};
