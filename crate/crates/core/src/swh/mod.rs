//! Single-word handshake: wire codec, lossy link model and the
//! discrete-event controller/device session.

mod channel;
mod codec;
mod session;

pub use channel::{ChannelConfig, ChannelError, Fate, Link};
pub use codec::{decode_job, decode_share, encode_job, encode_share, DecodeError, JobMessage, ShareMessage};
pub use session::{
    run_monologue_session, run_session, run_swh_session, session_jobs, session_template, write_session_log,
    HandshakeRecord, SessionError, SessionReport, SESSION_LOG_HEADER,
};
