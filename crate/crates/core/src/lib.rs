pub mod config;
pub mod construction;
pub mod harness;
pub mod llm;
pub mod memory;
pub mod search;
pub mod service;
pub mod topics;
