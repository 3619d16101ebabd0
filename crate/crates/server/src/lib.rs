//! Network service and command line for the backchannel facilitator.

pub mod cli;
pub mod config;
pub mod http;
pub mod hub;

pub use config::{ConfigError, ServerConfig};
pub use http::{router, AppState};
pub use hub::{Dispatch, Hub, HubError, JoinTicket, MeetingSnapshot};
