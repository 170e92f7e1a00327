pub mod bitmatch;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod neural;
pub mod pipeline;
pub mod synth;
pub mod types;
