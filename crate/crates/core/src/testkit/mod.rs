//! Independent reference implementations used as oracles by the test suites.
//!
//! Everything in here is deliberately naive and kept separate from the
//! production code paths it checks: the matcher scans flat vectors instead of
//! price maps, the quadrature integrates intensities numerically instead of
//! using closed forms.

mod quadrature;
mod reference_book;

pub use quadrature::adaptive_simpson;
pub use reference_book::{RandomOpStream, ReferenceBook, ReferenceOp};
