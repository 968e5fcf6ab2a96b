//! Staircase flat surfaces on the six-punctured sphere.
//!
//! Two halves, one exact and one numerical:
//!
//! * [`flatsurf`] and [`surgery`] model doubles of rectilinear polygons as
//!   horizontal-cylinder diagrams over exact rationals, with the cylinder
//!   deformations (shear, vertical rescale, quarter-turn) and the scripted
//!   reductions that turn pillowcase surfaces into staircases.
//! * [`sc`], [`asymptotics`] and [`probe`] evaluate the Schwarz-Christoffel
//!   side-length integrals of staircase polygons, invert them for the
//!   accessory parameters, extract the logarithmic small-parameter
//!   expansions of the side lengths, and probe the second differences of
//!   the induced area function along rectangle families.

pub mod asymptotics;
pub mod dd;
pub mod flatsurf;
pub mod probe;
pub mod quad;
pub mod rational;
pub mod real;
pub mod sc;
pub mod surgery;
