//! Statistical boosting toolkit.
//!
//! Three boosting engines share one data model:
//!
//! - [`adaboost`]: discrete AdaBoost with decision stumps for ±1 labels.
//! - [`gradboost`]: component-wise functional gradient descent with linear and
//!   P-spline base-learners over a choice of [`losses::Family`].
//! - [`likboost`]: component-wise likelihood-based boosting for GLMs and the
//!   Cox proportional hazards model, including mandatory unpenalized covariates.
//!
//! [`stopping`] selects the number of boosting iterations, either from the
//! degrees of freedom of the cumulative smoother (AICc / BIC) or by resampling.

// Negated comparisons such as `!(x > 0.0)` deliberately also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaboost;
pub mod baselearners;
pub mod data;
mod error;
pub mod gradboost;
pub mod likboost;
pub mod linalg;
pub mod losses;
pub mod model_file;
pub mod stopping;

pub use error::{BoostError, ErrorKind, Result};
