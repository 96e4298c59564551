//! Green functions, invariant measures and non-archimedean limits of
//! meromorphically degenerating complex Hénon families
//! `H_t(x, y) = (p_t(x) − a(t)·y, x)`.

pub mod complex;
pub mod dd;
pub mod error;
pub mod family;
pub mod homogenization;
pub mod hybrid;
pub mod json;
pub mod laurent;
pub mod measure;
pub mod na;
pub mod normalize;
pub mod roots;
pub mod scalar;

pub use complex::{Branch, ComplexHenon, GreenBudget, GreenEstimate, GreenPair, GreenStatus, Region, C2};
pub use error::{Error, Result};
pub use family::{ExactLaurent, FamilySpec, HenonFamily};
pub use laurent::{invert_series, HybridNormParams, LaurentPoly, Order, Prec, SeriesOrder, TruncatedSeries};
pub use na::{ExtRational, NAGreenStatus, NAGreenValue, NAHenon, NAPoint, ValPoint};
pub use scalar::{QComplex, Scalar};
