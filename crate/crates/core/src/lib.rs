pub mod agent;
pub mod corpus;
pub mod eval;
pub mod geometry;
pub mod llmclient;
pub mod prompts;
pub mod qagen;
pub mod toolproto;
