//! Edge-centric learning on 2-manifold triangle meshes.
//!
//! The crate covers the whole pipeline: OBJ input and edge topology ([`mesh`]), rigid-motion
//! invariant edge features ([`features`]), the edge convolution and incremental edge-collapse
//! pooling operators ([`ops`]), a small reverse-mode engine with the network layers built on
//! them ([`nn`]), synthetic datasets ([`datasets`]) and the training / evaluation harnesses
//! ([`pipelines`]).

pub mod datasets;
pub mod features;
pub mod mesh;
pub mod nn;
pub mod ops;
pub mod pipelines;
pub mod tensor;

pub use features::{ChannelStats, FeatureError, FeatureKind, FeatureTensor};
pub use mesh::{EdgeTopology, Mesh, MeshError};
pub use ops::OpsError;
pub use tensor::Tensor;
