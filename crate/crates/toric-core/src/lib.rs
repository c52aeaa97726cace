//! Exact-arithmetic computational geometry for smooth toric fans.
//!
//! The crate builds complete smooth fans in low rank (products of projective
//! lines, iterated excluded barycentric subdivisions, cylinders over
//! subdivisions), orders their maximal cones, computes Chow groups by three
//! independent methods, and assembles fan-indexed chain complexes whose
//! homology recovers those Chow groups. All arithmetic is exact: matrix
//! computations run over arbitrary-precision integers and never touch
//! floating point.
//!
//! Module map:
//! - [`exactlin`]: integer matrices, Smith normal form, kernels, solvers.
//! - [`fan`]: cones, fans, face structure, validity, quotients, products.
//! - [`subdivide`]: star and excluded barycentric subdivisions, the
//!   distinguished fan towers, cylinders.
//! - [`ordering`]: orderings of maximal cones and their verification.
//! - [`chow`]: Chow group presentations, bases, divisor cycles, pullbacks.
//! - [`complexes`]: fan-indexed chain complexes, structure maps, homology.
//! - [`verify`]: bundled verification suites with machine-readable reports.

pub mod exactlin;
pub mod par;

pub mod chow;
pub mod complexes;
pub mod fan;
pub mod ordering;
pub mod subdivide;
pub mod verify;
