//! Wilson, Kuperberg and derived-from-Kuperberg plugs.
//!
//! Flows are integrated in the coordinates of the Wilson cylinder; the
//! self-insertions act through exact jumps between the horizontal faces
//! and the inserted faces.

pub mod analysis;
pub mod error;
pub mod geom;
pub mod insertion;
pub mod quotient;
pub mod report;
pub mod wilson;

pub use error::{Error, Result};
pub use geom::CylPoint;
pub use report::ValidationReport;
