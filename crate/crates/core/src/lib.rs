//! Closed planar curves evolving in 2-D vector fields, and the tools to
//! decide whether their convergence is stable.

pub mod error;
pub mod experiment;
pub mod field;
pub mod flows;
pub mod io;
pub mod levelset;
pub mod marker;
pub mod stability;

pub use error::{Error, Result, Terminal};
