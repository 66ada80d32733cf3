//! Exact computer algebra for genus-zero quantum Serre duality on projective
//! spaces: narrow cohomology, twisted quantum D-modules, Gamma integral
//! structures and the duality maps between the total space of E^v and the
//! zero locus of a section of E.

pub mod charcls;
pub mod cohring;
pub mod error;
pub mod hypergeo;
pub mod qdm;
pub mod scalars;
pub mod serre;
pub mod series;

pub use error::{QsdError, Result};
pub use scalars::{Coeff, Rat, Scalar};

/// Series with rational coefficients, used by the hypergeometric pipeline.
pub type RatSeries = series::Series<Rat>;
/// Series with symbolic coefficients, used where i, pi and g appear.
pub type ScalarSeries = series::Series<Scalar>;
pub type RatSeriesMatrix = series::SeriesMatrix<Rat>;
pub type ScalarSeriesMatrix = series::SeriesMatrix<Scalar>;
