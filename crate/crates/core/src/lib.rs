pub mod algebra;
pub mod beta;
pub mod error;
pub mod escape;
pub mod graph;
pub mod hole;
pub mod measure;
pub mod subshift;
pub mod survivor;
pub mod toral;
pub mod trap;
pub mod word;

pub use error::{Error, Result};
