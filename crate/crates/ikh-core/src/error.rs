//! Crate-wide error type aggregating the per-module errors.

use thiserror::Error;

use crate::compose::ComposeError;
use crate::eval::EvalError;
use crate::net::{CheckpointError, NetError};
use crate::sac::SacError;
use crate::sim::SimError;
use crate::track::{SpawnError, TrackError};

/// Any error the core crate can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Spawn(#[from] SpawnError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Sac(#[from] SacError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
