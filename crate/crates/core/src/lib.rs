pub mod stimgen;
pub mod staircase;
pub mod listenersim;
pub mod protocol;
pub mod analysis;
pub mod harness;
