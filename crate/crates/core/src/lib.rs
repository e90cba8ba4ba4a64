//! Explicit divergence-free blob flows on the torus whose time-reversed flow
//! map crushes the torus onto a Cantor set, plus the numerical machinery that
//! checks the construction: exact trajectories, an adaptive integrator, norm
//! scaling fits, Hölder sweeps and a measure-collapse report.

pub mod analysis;
pub mod blob;
pub mod bump;
pub mod cantor;
pub mod error;
pub mod field;
pub mod flowmap;
pub mod moving_blob;
pub mod quad;
pub mod verify;


pub use blob::{BlobDirection, Cutoff, StationaryBlob};
pub use cantor::{Address, ScaleSequence, SignVector, TorusPoint};
pub use error::{Error, Result};
pub use field::{Construction, FieldKind, Params, VectorField};
pub use flowmap::{FlowMapReport, Integrator, Trajectory};
pub use moving_blob::BlobSpec;
