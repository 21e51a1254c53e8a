//! Two-state reference simulator for the supported Verilog subset. Sources
//! are parsed with testbench constructs allowed, the module hierarchy is
//! flattened into a single design image, and an event loop runs initial
//! blocks against continuous assigns, combinational always blocks, and
//! edge-triggered processes.
//!
//! Values are zero-initialized unsigned integers of up to 64 bits; there is
//! no x or z propagation. Self-checking testbenches that compare against
//! expected values work unchanged under these semantics.

mod cli;
mod compile;
pub mod ir;
mod sim;

pub use cli::cli_main;
pub use compile::compile;
pub use sim::{simulate, SimResult};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Compile(String),
}
