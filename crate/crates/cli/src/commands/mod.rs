pub mod associate;
pub mod eval;
pub mod explain;
pub mod generate;
pub mod train;
