//! Graph clustering by gradient descent on the map equation.
//!
//! A [`FlowModel`] turns a [`Graph`] into visit rates and a flow matrix. The
//! [`mapeq`] module scores hard partitions exactly and soft assignments
//! differentiably; [`neural`] encoders produce soft assignments and
//! [`train`] fits them with Adam on a reverse-mode [`autodiff`] tape.

pub mod autodiff;
pub mod error;
pub mod features;
pub mod flow;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod mapeq;
pub mod metrics;
pub mod neural;
pub mod sparse;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use features::{identity_features, load_features, FeatureMatrix};
pub use flow::{FlowModel, FlowOptions};
pub use graph::{connected_components, load_edge_list, Graph};
pub use mapeq::{Codelength, NodeFlowMode, Partition, SoftAssignment};
pub use metrics::{ami, mixing, AmiNormalization};
pub use neural::{Architecture, EncoderConfig, EncoderParams};
pub use sparse::CsrMatrix;
pub use tensor::Tensor;
pub use train::{hard_partition, train, TrainConfig, TrainedResult};
