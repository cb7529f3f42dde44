use std::path::PathBuf;

use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix expected to be symmetric is not, within relative tolerance 1e-10.
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    /// An eigenvalue fell below the PSD floor of -1e-8 times the largest eigenvalue.
    #[error("matrix is indefinite (eigenvalue {eigenvalue:.3e} below floor {floor:.3e})")]
    IndefiniteMatrix { eigenvalue: f64, floor: f64 },

    /// Matrix expected to be orthogonal is not, within Frobenius tolerance 1e-8.
    #[error("matrix is not orthogonal (Gram defect {0:.3e})")]
    NotOrthogonal(f64),

    /// Index array is not a bijection of {0..n-1}.
    #[error("index array is not a permutation of 0..{0}")]
    InvalidPermutation(usize),

    /// Two matrices that must share a shape do not.
    #[error("shape mismatch ({0}x{1} vs {2}x{3})")]
    ShapeMismatch(usize, usize, usize, usize),

    /// Two representations or conditions live in different ambient dimensions.
    #[error("dimension mismatch ({0} vs {1})")]
    DimensionMismatch(usize, usize),

    /// Two representations hold different numbers of conditions.
    #[error("condition count mismatch ({0} vs {1})")]
    ConditionCountMismatch(usize, usize),

    /// Not enough trials for the requested estimate.
    #[error("too few samples (need {needed}, have {have})")]
    TooFewSamples { needed: usize, have: usize },

    /// Interpolation parameter outside [0, 2].
    #[error("alpha must lie in [0, 2], got {0}")]
    AlphaOutOfRange(f64),

    /// Energy-distance exponent outside its admissible range.
    #[error("q must lie in (0, 2], got {0}")]
    InvalidQ(f64),

    /// Shrinkage intensity outside [0, 1].
    #[error("shrinkage gamma must lie in [0, 1], got {0}")]
    GammaOutOfRange(f64),

    /// Condition weights must be nonnegative, finite, and not all zero.
    #[error("condition weights must be nonnegative with a positive sum")]
    InvalidConditionWeights,

    /// A moment-form operation was asked of a condition that carries no moments.
    #[error("condition {0} carries no usable moments")]
    NoMoments(usize),

    /// A sample-form operation was asked of a condition that holds only moments.
    #[error("condition {0} holds no samples")]
    NoSamples(usize),

    /// A sample block with zero trials.
    #[error("condition {0} holds an empty sample block")]
    EmptySamples(usize),

    /// Requested output dimension exceeds the ambient dimension.
    #[error("requested dimension {requested} exceeds available {available}")]
    DimensionTooLarge { requested: usize, available: usize },

    /// Distance-matrix input is not symmetric.
    #[error("distance matrix is asymmetric at ({0}, {1})")]
    AsymmetricInput(usize, usize),

    /// Distance-matrix input has a nonzero diagonal entry.
    #[error("distance matrix has nonzero diagonal entry {1:.3e} at index {0}")]
    NonzeroDiagonal(usize, f64),

    /// Distance-matrix entry is negative where nonnegativity is required.
    #[error("distance matrix has negative entry {2:.3e} at ({0}, {1}); run metric repair first")]
    NegativeEntry(usize, usize, f64),

    /// A cross-validation fold lost all members of some class.
    #[error("class {0:?} absent from a training fold; reduce folds or test fraction")]
    DegenerateFold(String),

    /// A pairwise distance computation failed; indices identify the pair.
    #[error("distance computation failed for pair ({i}, {j}): {source}")]
    PairFailed {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    /// Binary block does not start with the expected magic bytes.
    #[error("bad magic in {path}: expected SSMB")]
    BadMagic { path: PathBuf },

    /// Binary block carries an unsupported format version.
    #[error("unsupported bundle version {version} in {path}")]
    VersionUnsupported { version: u32, path: PathBuf },

    /// Byte length of a binary block disagrees with its declared dimensions.
    #[error("length mismatch in {path}: expected {expected} bytes, found {found} (at offset {offset})")]
    LengthMismatch {
        path: PathBuf,
        expected: u64,
        found: u64,
        offset: u64,
    },

    /// A non-finite value was read or about to be written.
    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },

    /// An iterative solver exhausted its budget without converging.
    #[error("solver did not converge: {0}")]
    NotConverged(String),

    /// Worker-pool construction failed.
    #[error("worker pool: {0}")]
    WorkerPool(String),

    /// Manifest contents disagree with the arrays on disk.
    #[error("manifest mismatch in {path}: {detail}")]
    ManifestMismatch { path: PathBuf, detail: String },

    /// Malformed CSV or manifest text.
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest serialization failed")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for I/O failures tagged with their path.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
