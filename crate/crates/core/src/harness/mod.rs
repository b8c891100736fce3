//! Synthetic data, metrics, the enumeration oracle and file I/O.

pub mod io;
pub mod metrics;
pub mod oracle;
pub mod replicate;
pub mod synthetic;
