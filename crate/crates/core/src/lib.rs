//! Hill-type musculoskeletal simulation with wrap-surface muscle paths,
//! muscle-property perturbations, and the model conversion and fitting
//! pipeline (geometry import, wrap fitting, force-property fitting).

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dynamics;
pub mod fit;
pub mod geometry;
pub mod model;
pub mod muscle;
pub mod perturb;
pub mod scenario;
pub mod spatial;
