use std::path::PathBuf;

use crate::config::Violation;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("unknown preset `{0}`; run `physlab list` to see the registered presets")]
    UnknownPreset(String),
    #[error("invalid configuration:\n{}", render(.0))]
    Invalid(Vec<Violation>),
    #[error("{0}")]
    Infeasible(String),
    #[error("cannot read config file {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}; check that the output directory exists and is writable")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("training diverged ({context}, step {step}); try a smaller eta or a higher snr_db")]
    Diverged { context: String, step: u64 },
    #[error("{context}: {source}")]
    Core { context: String, source: physlab_core::Error },
}

fn render(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        use physlab_core::Error as E;
        match self {
            HarnessError::UnknownPreset(_) | HarnessError::Invalid(_) | HarnessError::Infeasible(_) => 2,
            HarnessError::ReadConfig { .. } | HarnessError::Io { .. } => 4,
            HarnessError::Diverged { .. } => 3,
            HarnessError::Core { source, .. } => match source {
                E::Domain(_) => 2,
                _ => 3,
            },
        }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(physlab_core::Error) -> HarnessError {
        let context = context.into();
        move |source| match source {
            physlab_core::Error::Diverged { step } => HarnessError::Diverged { context, step },
            source => HarnessError::Core { context, source },
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
