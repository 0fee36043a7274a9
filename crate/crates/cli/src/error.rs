use rfwave_core::cauchy_solver::SolverError;
use rfwave_core::field_grid::GridError;
use rfwave_core::nonlinearity::NonlinearityError;
use rfwave_core::riesz_feller::OperatorError;
use rfwave_core::stable_kernel::KernelError;
use rfwave_core::wave_lab::WaveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("field_grid: {0}")]
    Grid(#[from] GridError),
    #[error("nonlinearity: {0}")]
    Nonlinearity(#[from] NonlinearityError),
    #[error("riesz_feller: {0}")]
    Operator(#[from] OperatorError),
    #[error("stable_kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("cauchy_solver: {0}")]
    Solver(#[from] SolverError),
    #[error("wave_lab: {0}")]
    Wave(#[from] WaveError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub fn io_context(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}
