//! The separation network and its configuration.

pub mod checkpoint;
pub mod config;
pub mod layout;
pub mod network;

pub use checkpoint::{Checkpoint, CheckpointManifest, NamedTensor};
pub use layout::{parameter_sites, Init, ParamSpec};
pub use config::{MaskActivation, ModelConfig, ModelFamily, Normalization, Preset};
pub use network::{RecordedOutput, Separator, SeparatorOutput};
