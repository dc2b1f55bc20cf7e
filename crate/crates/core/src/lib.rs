//! Low-degree agreement testing over finite vector spaces F_q^m.
//!
//! The crate is organised bottom-up:
//!
//! * [`field`]: GF(p^e) arithmetic with a canonical integer encoding.
//! * [`geometry`]: canonical affine subspaces, enumeration, sampling, counts.
//! * [`polynomial`]: low-degree polynomials in subspace-local charts.
//! * [`table`]: subspace tables, generators and the JSON interchange format.
//! * [`agreement`]: exact and Monte-Carlo estimators for the agreement tests.
//! * [`decoder`]: conditional plurality, excellence, self-correction, decoding.
//! * [`spectral`]: inclusion graphs, walk spectra and sampling-lemma checks.

pub mod agreement;
pub mod decoder;
pub mod error;
pub mod field;
pub mod geometry;
mod linalg;
pub mod polynomial;
pub mod rng;
pub mod spectral;
pub mod table;

pub use error::{Error, Result};
pub use field::{FieldCtx, FieldElem, FieldSpec};
pub use geometry::{AffineSubspace, Constraint, Point, SubspaceFamily, SubspaceIndex};
pub use polynomial::{GlobalPoly, LocalPoly};
pub use table::{Generator, SubspaceTable, TableHeader};

/// Default enumeration cap.
pub const DEFAULT_CAP: u128 = 10_000_000;

/// Crate version echoed into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
