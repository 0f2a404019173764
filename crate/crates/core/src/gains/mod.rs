//! Incremental L2 gain bounds: vertex LMIs, anchor linearizations,
//! certificates, trajectory-level dissipation checks and an LTI
//! frequency-domain oracle.

mod certificate;
mod dissipation;
mod lmi;
mod linearized;
mod oracle;

pub use certificate::*;
pub use dissipation::*;
pub use lmi::*;
pub use linearized::*;
pub use oracle::*;
