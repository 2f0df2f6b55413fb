pub mod banded;
pub mod linalg;
pub mod powersum;
pub mod rk;
pub mod roots;
pub mod taylor;
