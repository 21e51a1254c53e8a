//! Verilog-2001 synthesizable-subset frontend: lexer, parser, canonical
//! printer, and data-flow graph extraction. A relaxed mode additionally
//! accepts the testbench constructs the bundled simulator executes (initial
//! blocks, delays, for loops, $display/$finish).

pub mod ast;
pub mod dfg;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::{parse_literal, Module, SourceFile};
pub use dfg::{extract_dfg, instantiated_modules, Dfg};
pub use parser::{parse_module, parse_source, ParseOptions};
pub use printer::{print_module, print_source};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HdlError {
    #[error("lex error at {line}:{col}: {msg}")]
    Lex { line: u32, col: u32, msg: String },
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },
    #[error("unsupported construct at {line}:{col}: {construct}")]
    Unsupported {
        construct: String,
        line: u32,
        col: u32,
    },
}

impl HdlError {
    pub fn position(&self) -> (u32, u32) {
        match self {
            HdlError::Lex { line, col, .. }
            | HdlError::Parse { line, col, .. }
            | HdlError::Unsupported { line, col, .. } => (*line, *col),
        }
    }
}
