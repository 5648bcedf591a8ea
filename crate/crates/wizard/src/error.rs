use thiserror::Error;

#[derive(Debug, Error)]
pub enum WizardError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("inconsistent knowledge base: {0}")]
    Consistency(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("unknown workflow `{0}`")]
    UnknownWorkflow(String),
    #[error("unknown step `{step}` in workflow `{workflow}`")]
    UnknownStep { workflow: String, step: String },
    #[error("step `{step}` has several true guards, leading to {targets:?}")]
    AmbiguousSuccessor { step: String, targets: Vec<String> },
    #[error("step `{step}` has no true guard")]
    NoSuccessor { step: String },
    #[error("cannot parse quantity `{text}`: {reason}")]
    Quantity { text: String, reason: String },
    #[error("rule `{rule}` takes {expected} arguments, got {got}")]
    Arity { rule: String, expected: usize, got: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("type error: {0}")]
    Type(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WizardError>;
