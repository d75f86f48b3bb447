pub mod analysis;
pub mod ast;
pub mod codegen;
pub mod flc;
pub mod frontend;
pub mod harness;
pub mod narrow;
pub mod reader;
pub mod sld;
pub mod transform;
