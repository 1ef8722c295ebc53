#![no_std]
extern crate alloc;

pub mod borgs;
pub mod bounds;
pub mod construct;
pub mod dyadic;
pub mod phase;
pub mod qnn;
pub mod rng;
pub mod solver;
