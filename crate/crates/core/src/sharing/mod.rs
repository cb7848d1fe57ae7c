//! Parameter identity under cross-layer sharing, the parameter store, and
//! the size audit.

pub mod audit;
pub mod key;
pub mod scheme;
pub mod store;

pub use audit::{audit, audit_against, total_params, ParamReport, ParamRow};
pub use key::{Component, ParamKey, Site, TensorRole};
pub use scheme::{enumerate_ablation_grid, unique_site_count, SharingConfig, SharingScheme};
pub use store::{Bindings, ParameterStore};
