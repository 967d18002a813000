pub mod field;
pub mod linalg;
pub mod poly;
pub mod scalar;

pub use field::{AlgebraicNumber, NumberField};
pub use poly::Poly;
pub use scalar::Scalar;
