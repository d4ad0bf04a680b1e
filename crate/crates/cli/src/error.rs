use std::path::PathBuf;

use somno::autodiff::checkpoint::CheckpointError;
use somno::autodiff::TensorError;
use somno::data::DataError;
use somno::eval::EvalError;
use somno::experiment::ExperimentError;
use somno::kv::KvError;
use somno::sigproc::SigprocError;
use somno::train::TrainError;

/// Every failure a command can end with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<KvError> for CliError {
    fn from(e: KvError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SigprocError> for CliError {
    fn from(e: SigprocError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Config(e.to_string()),
            TrainError::NonFiniteGrad { .. } | TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            TrainError::Tensor(t) => t.into(),
            TrainError::Eval(t) => t.into(),
            TrainError::Checkpoint(t) => t.into(),
            TrainError::Log(source) => CliError::Io { path: PathBuf::from("<training log>"), source },
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) | ExperimentError::Augment(_) => CliError::Config(e.to_string()),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Train(t) => t.into(),
            ExperimentError::Tensor(t) => t.into(),
            ExperimentError::Eval(t) => t.into(),
        }
    }
}
