//! Object segmentation seeded by per-window classifier confidence maps.
//!
//! Numeric modules are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`. The experiment pipeline runs in `f64`.

pub mod classify;
pub mod eegmap;
pub mod grabcut;
pub mod imaging;
pub mod optimize;
pub mod pipeline;
pub mod scalar;
pub mod segment;
pub mod synthsig;

pub use scalar::Real;

pub type EegMap = eegmap::EegMap<f64>;
pub type PixelMap = imaging::PixelMap<f64>;
pub type FlowNetwork = grabcut::FlowNetwork<f64>;
pub type MinCut = grabcut::MinCut<f64>;
pub type Gmm = grabcut::Gmm<f64>;
pub type GrabcutSession = grabcut::GrabcutSession<f64>;
pub type GrabcutState = grabcut::GrabcutState<f64>;
pub type SvmParams = classify::SvmParams<f64>;
pub type SvmModel = classify::SvmModel<f64>;
pub type Standardizer = classify::Standardizer<f64>;
pub type GridSearchResult = classify::GridSearchResult<f64>;
pub type Recording = synthsig::Recording<f64>;
pub type Epoch = synthsig::Epoch<f64>;
pub type FeatureVector = synthsig::FeatureVector<f64>;
pub type SosFilter = synthsig::filter::SosFilter<f64>;
