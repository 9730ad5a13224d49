//! Exact quantum Leray-Hirsch engine for split local P^r flops.
pub mod birkhoff;
pub mod cohring;
pub mod curveclasses;
pub mod exactalg;
pub mod geometry;
pub mod golden;
pub mod ifunc;
pub mod lerayhirsch;
pub mod pfsystem;
pub mod regularize;
pub mod scenario;
