pub mod analyze;
pub mod batch;
pub mod logs;
pub mod report;
pub mod server;
pub mod synth;
