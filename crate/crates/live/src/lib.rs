//! Turn-based sessions in which a human controls the main agent while a
//! chosen helper assists, served as JSON over WebSocket or plain HTTP.
//!
//! The helper acts from the state before the human's move and the human's
//! previous action, exactly as in planner-controlled episodes. By default
//! no message names the helper or exposes its internals, so trials can be
//! run blind; debug sessions add helper diagnostics to every result.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ServerMessage, SessionConfig};
pub use server::{router, serve, Connection};
pub use session::{LiveError, LiveService};
