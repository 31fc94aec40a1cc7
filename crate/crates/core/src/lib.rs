pub mod agents;
pub mod bayes;
pub mod cli;
pub mod config;
pub mod elicitation;
pub mod evaluation;
pub mod fragment;
pub mod glue;
pub mod service;
pub mod synth;
