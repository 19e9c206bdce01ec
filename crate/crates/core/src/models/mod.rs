//! Benchmark posteriors.

mod bessel;
mod besselk;
mod circular;
mod deblur;
mod gaussian;
mod laplace;
mod nuclear;

pub use bessel::{bessel_k_ratio, ln_bessel_k};
pub use besselk::{
    build_besselk_logistic, synthetic_logistic, BesselKLogistic, SyntheticLogistic,
    DEFAULT_BESSEL_EPS, DEFAULT_BESSEL_P,
};
pub use circular::{
    build_wrapped_mixture, sample_wrapped_mixture, wrapped_laplace_density, wrapped_shift,
    WrappedLaplaceMixture, CIRCULAR_DIM,
};
pub use deblur::{
    blur_and_noise, build_tv_deblur, test_scene, uniform_blur, SparseRows, TvDeblur,
    BLUR_WIDTH, DEFAULT_DEBLUR_ALPHA, DEFAULT_DEBLUR_SIGMA,
};
pub use gaussian::{build_gaussian, default_variances, AnisotropicGaussian};
pub use laplace::{build_laplace, AnisotropicLaplace};
pub use nuclear::{build_nuclear, checkerboard, NuclearNormDenoise, Residual};
