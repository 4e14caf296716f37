use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    Lattice(String),

    #[error("empty lattice")]
    EmptyLattice,

    #[error("requested {requested} neighbors but lattice holds {available} nodes")]
    TooManyNeighbors { requested: usize, available: usize },

    #[error("singular moment matrix")]
    Singular,

    #[error(
        "moment matrix ill-conditioned (condition estimate {condition:.3e} > {threshold:.1e}); \
         increase the normalized shape parameter or shrink the stencil"
    )]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("stencil for node {node}: {source}")]
    Stencil {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dispersion pole: permittivity undefined at omega = 0 with zero collision frequency")]
    DispersionPole,

    #[error("source node {0} lies inside the PML")]
    SourceInPml(usize),

    #[error("non-finite field value at step {step}")]
    NonFinite { step: u64 },

    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("cannot normalize an all-zero profile")]
    ZeroProfile,

    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
