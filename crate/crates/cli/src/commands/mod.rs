pub mod consensus_demo;
pub mod eval;
pub mod quantbench;
pub mod train;

/// Command failure, split by exit code: 1 for usage/config problems, 2 for
/// runtime aborts.
#[derive(Debug)]
pub enum CmdError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CmdError {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        CmdError::Usage(e.into())
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        CmdError::Runtime(e.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 1,
            CmdError::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CmdError::Usage(e) | CmdError::Runtime(e) => format!("{e:#}"),
        }
    }
}
