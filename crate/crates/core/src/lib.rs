//! Unit-root vs. explosive model selection for AR(1) processes by information
//! criteria, with OLS and indirect-inference estimation.

// NaN-rejecting `!(x > 0.0)` guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod io;
pub mod limits;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod root;
pub mod simulate;

pub use criteria::{information_criterion, penalty, select, select_fit, select_values, SelectionResult};
pub use error::{Error, Result};
pub use estimate::{
    g_of, h_inverse, h_of, indirect_fit, ols_fit, Binding, BindingTable, Estimator, FitResult, IdentityBinding,
};
pub use model::{kappa_n_of, rho_n_of, ErrorSpec, InitSpec, ModelSpec, PenaltySpec};
pub use simulate::{gen_path, SeriesSample};
