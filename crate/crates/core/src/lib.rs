pub mod entropy;
pub mod error;
pub mod expr;
pub mod gauge;
pub mod linalg;
pub mod master_equation;
pub mod models;
pub mod path;
pub mod sampling;
pub mod thermo;
pub mod timefn;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use gauge::{apply_gauge, GaugeSpec, GaugedModel};
pub use master_equation::{Channel, DensityMatrix, MasterEquationModel, Operator, Signature};
pub use path::{accumulate, evolve, PathLedger, Trajectory};
pub use timefn::TimeFn;
