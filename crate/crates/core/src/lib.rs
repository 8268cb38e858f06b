pub mod channel;
pub mod error;
pub mod linalg;
pub mod tensor;
pub mod training;
pub mod cpd;
pub mod recovery;
pub mod beamforming;
pub mod somp;
pub mod crb;
pub mod harness;

pub use beamforming::{BeamformingConfig, BeamformingSolution};
pub use channel::{ArrayGeometry, ChannelRealization, CompositePaths, OfdmConfig};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentRecord, Method, Profile};
pub use recovery::ParameterEstimate;
pub use tensor::{ComplexTensor3, FactorTriple};
pub use training::{Snr, TrainingConfig};
