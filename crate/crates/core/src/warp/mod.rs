//! Forward splatting of feature maps along a motion field.

mod domain;
mod feature;
mod grad;
mod refine;
mod sample;
mod splat;

pub use domain::{warp_domain, warp_domain_with, WarpMode};
pub use feature::{FeatureMap, Semantics};
pub use grad::{splat_gradients, SplatGradients};
pub use refine::{refine, refine_masked, DEFAULT_REFINE_PASSES};
pub use sample::backward_warp;
pub use splat::{
    kernel, softmax_splat, softmax_splat_with, splat_sum, splat_sum_with, splat_weights, SplatResult, COVERAGE_EPS,
};
