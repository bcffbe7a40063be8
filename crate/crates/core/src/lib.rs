pub mod abduction;
pub mod answering;
pub mod bridge;
pub mod corpus;
pub mod error;
pub mod facts;
pub mod hypothesis;
pub mod knowledge;
pub mod metrics;
pub mod pipeline;
pub mod scorer;
pub mod text;

pub use error::{Error, ErrorKind, Result};
