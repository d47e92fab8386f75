pub mod anova;
pub mod cli;
pub mod fixtures;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod normal;
pub mod option;
pub mod preint;
pub mod norms;
pub mod quadrature;
pub mod subset;
pub mod weights;
