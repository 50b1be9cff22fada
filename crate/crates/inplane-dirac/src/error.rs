use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("exponent {exponent} exceeds the representable range (|x| > {limit})")]
    Overflow { exponent: f64, limit: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no quantization possible: {0}")]
    NoQuantization(String),
    #[error("branch error: {0}")]
    Branch(String),
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    IterationLimit {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("ambiguous zero-mode count: largest gap ratio {best_ratio} below {required}; singular values {singular_values:?}")]
    AmbiguousCount {
        best_ratio: f64,
        required: f64,
        singular_values: Vec<f64>,
    },
    #[error("junction system is numerically singular (condition number {condition:e})")]
    NearSingular { condition: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
