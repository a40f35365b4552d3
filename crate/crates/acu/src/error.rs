//! Error type shared by every module of the crate.

use std::fmt;

/// Errors produced by the library.
///
/// The CLI maps these onto process exit codes: verification failures exit
/// with 1, malformed input with 2 and resource-cap overruns with 3.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A denominator of zero was passed to a rational constructor.
    ZeroDenominator,
    /// Matrix dimensions do not match the operation's requirements.
    DimensionMismatch { expected: String, found: String },
    /// Input that must be skew-symmetric is not.
    NotSkewSymmetric { row: usize, col: usize },
    /// A standard block form was requested with too many blocks for the
    /// ambient dimension (2t > n) or with a zero block value.
    InvalidBlock(String),
    /// Generic structurally invalid input (shapes, ranges, parse problems).
    InvalidInput(String),
    /// An enumeration would exceed the configured cap.
    CapExceeded { required: String, cap: u64 },
    /// A commutator was not a scalar matrix within tolerance.
    CommutatorNotScalar { i: usize, j: usize, defect: f64 },
    /// A matrix expected to be unitary exceeded the unitarity tolerance.
    NotUnitary { index: usize, defect: f64 },
    /// An angle could not be snapped to a rational with the allowed
    /// denominator within tolerance.
    SnapFailed { angle: f64, max_den: u64, distance: f64 },
    /// Two eigenvalue clusters were too close to separate reliably.
    ClusterAmbiguity { gap: f64, tol: f64 },
    /// An iterative numerical routine failed to converge.
    NonConvergence(String),
    /// A polynomial is not admissible for the given central extension
    /// (some block size is not divisible by the matching sigma).
    NotGoodPolynomial { k: u64, mult: u64, sigma: String },
    /// Eigenvalue data fails the membership test for the extension.
    MembershipFailed(String),
    /// An internal invariant that the theory guarantees was violated;
    /// always a bug, never a user error.
    InternalInvariant(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroDenominator => write!(f, "denominator must be nonzero"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotSkewSymmetric { row, col } => {
                write!(f, "matrix is not skew-symmetric at entry ({row}, {col})")
            }
            Error::InvalidBlock(msg) => write!(f, "invalid block form: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::CapExceeded { required, cap } => {
                write!(f, "enumeration of {required} elements exceeds cap {cap}")
            }
            Error::CommutatorNotScalar { i, j, defect } => write!(
                f,
                "commutator of matrices {i} and {j} is not scalar (defect {defect:.3e})"
            ),
            Error::NotUnitary { index, defect } => {
                write!(f, "matrix {index} is not unitary (defect {defect:.3e})")
            }
            Error::SnapFailed { angle, max_den, distance } => write!(
                f,
                "cannot snap angle {angle} to a rational with denominator <= {max_den} \
                 (best distance {distance:.3e})"
            ),
            Error::ClusterAmbiguity { gap, tol } => write!(
                f,
                "eigenvalue clusters separated by {gap:.3e} < 10*tol = {:.3e}; \
                 use a smaller tolerance or exact input",
                10.0 * tol
            ),
            Error::NonConvergence(msg) => write!(f, "numerical routine failed: {msg}"),
            Error::NotGoodPolynomial { k, mult, sigma } => write!(
                f,
                "root of order {k} has multiplicity {mult} not divisible by sigma = {sigma}"
            ),
            Error::MembershipFailed(msg) => write!(f, "membership test failed: {msg}"),
            Error::InternalInvariant(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
