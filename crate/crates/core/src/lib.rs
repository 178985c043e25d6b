//! Computer-control agent toolkit for vision-language models.
//!
//! - [`action`]: the action space and its JSON function-call format
//! - [`env`]: RFB (VNC) environment, screenshots and device events
//! - [`gateway`]: chat-completion backends, scripted replay
//! - [`pipeline`]: the planning / acting / reflecting control loop
//! - [`score`]: CC-Score and the fine-grained evaluation report
//! - [`store`]: on-disk session format, preference pairs and statistics
//! - [`service`]: HTTP control service for supervised annotation
//! - [`config`]: TOML run configuration

pub mod action;
pub mod config;
pub mod env;
pub mod gateway;
pub mod pipeline;
pub mod score;
pub mod service;
pub mod store;
