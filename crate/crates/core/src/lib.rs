pub mod corpus;
pub mod query;
pub mod qbe;
pub mod index;
pub mod matching;
pub mod oracle;
pub mod results;
pub mod synth;
pub mod api;
pub mod service;
pub mod cli;
