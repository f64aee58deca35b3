//! GCN encoders, the inner-product decoder's losses with closed-form
//! gradients, checkpoints, and the pretraining and clustering loops.

mod checkpoint;
mod encoder;
pub mod losses;
mod train;

pub(crate) use checkpoint::write_atomic;
pub use checkpoint::Checkpoint;
pub use encoder::{
    Arch, EncodeCache, EncoderInput, GaeModel, ThetaGrad, DEFAULT_EMBED, DEFAULT_HIDDEN,
};
pub use losses::{KlReduction, ReconWeighting};
pub use train::{
    pretrain, train_joint, LossBreakdown, OperatorToggles, PretrainReport, StopReason, TrainConfig,
    TrainOutcome,
};
