//! Learned operator selection: a small attention policy/value network, its
//! matrix kernel with hand-written gradients, clipped-surrogate training, and
//! the policy-driven search loop.

pub mod features;
pub mod kernel;
pub mod net;
pub mod ppo;
pub mod rlavns;
pub mod train;

use crate::construct::ConstructError;
use crate::gen::GenError;
use crate::model::ModelError;
use crate::operators::OperatorError;
use crate::search::SearchError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite value during optimization: {0}")]
    NonFinite(String),
    #[error("checkpoint problem: {0}")]
    Checkpoint(String),
    #[error("bad architecture: {0}")]
    Arch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
