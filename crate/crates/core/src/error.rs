use thiserror::Error;

#[derive(Debug, Error)]
pub enum VrnError {
    #[error("line {line}: malformed input: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown entity `{name}`")]
    DanglingEntity { line: usize, name: String },
    #[error("line {line}: duplicate triple")]
    DuplicateTriple { line: usize },
    #[error("line {line}: self-loop on `{name}` rejected")]
    SelfLoop { line: usize, name: String },
    #[error("empty graph")]
    EmptyGraph,
    #[error("unknown entity id {0}")]
    UnknownEntity(usize),
    #[error("unknown entity name `{0}`")]
    UnknownEntityName(String),
    #[error("empty token list")]
    EmptyTokens,
    #[error("entity {0} has an empty name")]
    EmptyName(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("answer unreachable: no topic entity has the answer in scope")]
    AnswerUnreachable,
    #[error("entity {0} is not in the scope")]
    NotInScope(usize),
    #[error("non-finite value in {block}: {detail}")]
    NonFinite { block: String, detail: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no eligible topic entity for question type `{0}`")]
    NoEligibleTopic(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("item {0} carries no topic label")]
    Unlabeled(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VrnError>;
