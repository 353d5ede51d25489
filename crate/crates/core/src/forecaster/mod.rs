//! The forecasting model: network assembly, training with EMA early
//! stopping, the member ensemble, and the on-disk model bundle.

mod bundle;
mod ensemble;
mod net;
mod train;

pub use bundle::{
    load_bundle, net_from_checkpoint, net_to_checkpoint, save_bundle, BundleError, Checkpoint,
    CheckpointDims, Tensor, CHECKPOINT_VERSION,
};
pub use ensemble::{thread_cap, train_ensemble, EnsembleModel, TrainingManifest, MANIFEST_VERSION};
pub use net::{ForecastNet, NetCache, NetDims, NetGrads};
pub use train::{
    train_one, validation_score, EarlyStopper, StopDecision, StopReport, TrainConfig, TrainError,
};
