use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {}", .0.join("; "))]
    InvalidChain(Vec<String>),

    #[error("invalid decay model: {0}")]
    InvalidDecay(String),

    #[error("channel {channel} out of range (chain has {n_channels} channels)")]
    ChannelOutOfRange { channel: usize, n_channels: usize },

    #[error("invalid pulse parameters: {0}")]
    InvalidPulse(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported level count {0} for closed-form analysis (supported: 3, 5, 7)")]
    UnsupportedLevelCount(usize),

    #[error("non-Hermitian matrix (max asymmetry {0:.3e})")]
    NonHermitian(f64),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown backend '{0}'")]
    UnknownBackend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
