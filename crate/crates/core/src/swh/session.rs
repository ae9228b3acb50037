//! Discrete-event controller/device sessions over a lossy link.
//!
//! The controller dispatches `depth` jobs at once and waits for all of them
//! before dispatching the next batch, 1 ns after the last response. With
//! `depth = 1` this is the blocking single-word handshake; larger depths
//! give the pipelined baseline, whose per-job timing is measured from batch
//! dispatch. The device works through its queue in arrival order.
//!
//! Work is idempotent per job: a retransmission of a queued or running job
//! is merged into it, and one of a finished job is answered from the cached
//! share without recomputing.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::channel::{ChannelConfig, ChannelError, Fate, Link};
use super::codec::{decode_job, decode_share, encode_job, encode_share, JobMessage, ShareMessage};
use crate::rng::{derive_key, purpose, stream};
use crate::sha_twin::{HeaderTemplate, Job, TimingSample, Twin, TwinError, MAX_ROUNDS};

/// One completed round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandshakeRecord {
    pub extranonce2: u64,
    pub t_send_ns: u64,
    pub t_recv_ns: u64,
    pub delta_t_ns: u64,
    pub difficulty: f64,
    pub temperature: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("device unresponsive for extranonce2 {extranonce2:#x} after {attempts} attempts")]
    Unresponsive { extranonce2: u64, attempts: u32, partial: Vec<HandshakeRecord> },
    #[error("invalid session: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Twin(#[from] TwinError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl SessionError {
    /// Records completed before the failure.
    pub fn partial(&self) -> &[HandshakeRecord] {
        match self {
            SessionError::Unresponsive { partial, .. } => partial,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    /// One record per job, in job order.
    pub records: Vec<HandshakeRecord>,
    /// The accepted response for each record.
    pub shares: Vec<ShareMessage>,
    /// Attempts used per job.
    pub attempts: Vec<u32>,
    /// Responses discarded because the job was already answered.
    pub duplicates: u64,
}

#[derive(Debug)]
enum Event {
    Arrive { job: usize, drop_response: bool, frame: Vec<u8> },
    Done { job: usize, sample: TimingSample, share: ShareMessage },
    Response { job: usize, sample: TimingSample, frame: Vec<u8> },
    Timeout { job: usize, attempt: u32 },
}

struct Scheduled {
    time: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // Reversed so that the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// What the device knows about one job.
#[derive(Debug, Clone)]
enum DeviceJob {
    Unseen,
    /// Queued or running; `respond` once any surviving attempt wants a reply.
    Pending {
        respond: bool,
    },
    Finished {
        sample: TimingSample,
        frame: Vec<u8>,
    },
}

struct Engine<'a> {
    twin: &'a mut Twin,
    jobs: &'a [Job],
    link: Link,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    t_send: Vec<Option<u64>>,
    attempts: Vec<u32>,
    answered: Vec<Option<(HandshakeRecord, ShareMessage)>>,
    device_queue: VecDeque<(usize, Vec<u8>)>,
    device_jobs: Vec<DeviceJob>,
    device_busy: bool,
    duplicates: u64,
}

impl Engine<'_> {
    fn schedule(&mut self, time: u64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled { time, seq: self.seq, event });
    }

    fn send(&mut self, job: usize, attempt: u32, now: u64) {
        self.attempts[job] = attempt;
        let j = &self.jobs[job];
        let frame = encode_job(&JobMessage {
            job_id: job as u64,
            extranonce2: j.extranonce2,
            header_template: j.template,
            difficulty: j.difficulty,
        });
        let timeout = self.link.config().retransmit_timeout_ns;
        match self.link.fate() {
            Fate::LostUplink => {}
            fate => {
                let at = now + self.link.delay();
                self.schedule(at, Event::Arrive { job, drop_response: fate == Fate::LostDownlink, frame });
            }
        }
        self.schedule(now + timeout, Event::Timeout { job, attempt });
    }

    fn start_next(&mut self, now: u64) -> Result<(), SessionError> {
        let Some((job, frame)) = self.device_queue.pop_front() else {
            self.device_busy = false;
            return Ok(());
        };
        self.device_busy = true;
        let msg = decode_job(&frame).map_err(|_| SessionError::Config("device received a corrupt frame"))?;
        let work = Job::new(msg.header_template, msg.extranonce2, msg.difficulty);
        let out = self.twin.run_job(&work, MAX_ROUNDS)?;
        let share = ShareMessage {
            job_id: msg.job_id,
            extranonce2: msg.extranonce2,
            nonce: out.eval.header.nonce,
            hash: out.eval.hash,
        };
        let done = now + out.sample.delta_t_ns;
        self.schedule(done, Event::Done { job, sample: out.sample, share });
        Ok(())
    }

    fn arrive(&mut self, job: usize, drop_response: bool, frame: Vec<u8>, now: u64) -> Result<(), SessionError> {
        match &mut self.device_jobs[job] {
            DeviceJob::Unseen => {
                self.device_jobs[job] = DeviceJob::Pending { respond: !drop_response };
                self.device_queue.push_back((job, frame));
                if !self.device_busy {
                    self.start_next(now)?;
                }
            }
            DeviceJob::Pending { respond } => *respond |= !drop_response,
            DeviceJob::Finished { sample, frame } => {
                if !drop_response {
                    let (sample, frame) = (*sample, frame.clone());
                    let at = now + self.link.delay();
                    self.schedule(at, Event::Response { job, sample, frame });
                }
            }
        }
        Ok(())
    }

    fn partial(&self) -> Vec<HandshakeRecord> {
        self.answered.iter().flatten().map(|(r, _)| *r).collect()
    }
}

/// Runs `jobs` through a session with the given pipeline depth.
pub fn run_session(
    twin: &mut Twin,
    channel: &ChannelConfig,
    jobs: &[Job],
    depth: usize,
    seed: u64,
) -> Result<SessionReport, SessionError> {
    channel.validate()?;
    if jobs.is_empty() {
        return Err(SessionError::Config("at least one job is required"));
    }
    if depth == 0 {
        return Err(SessionError::Config("pipeline depth must be at least 1"));
    }
    let mut seen = HashSet::with_capacity(jobs.len());
    if !jobs.iter().all(|j| seen.insert(j.extranonce2)) {
        return Err(SessionError::Config("extranonce2 values must be unique"));
    }
    let n = jobs.len();
    let mut e = Engine {
        twin,
        jobs,
        link: Link::new(*channel, ChaCha8Rng::seed_from_u64(derive_key(&[seed, purpose::CHANNEL]))),
        queue: BinaryHeap::new(),
        seq: 0,
        t_send: vec![None; n],
        attempts: vec![0; n],
        answered: vec![None; n],
        device_queue: VecDeque::new(),
        device_jobs: vec![DeviceJob::Unseen; n],
        device_busy: false,
        duplicates: 0,
    };
    let mut next = 0usize;
    let mut outstanding = 0usize;
    let mut done = 0usize;

    let dispatch = |e: &mut Engine, next: &mut usize, outstanding: &mut usize, now: u64| {
        let end = (*next + depth).min(n);
        for job in *next..end {
            e.t_send[job] = Some(now);
            e.send(job, 1, now);
        }
        *outstanding = end - *next;
        *next = end;
    };
    dispatch(&mut e, &mut next, &mut outstanding, 0);

    while done < n {
        let Some(Scheduled { time: now, event, .. }) = e.queue.pop() else {
            return Err(SessionError::Config("event queue drained before completion"));
        };
        match event {
            Event::Arrive { job, drop_response, frame } => e.arrive(job, drop_response, frame, now)?,
            Event::Done { job, sample, share } => {
                let frame = encode_share(&share);
                let respond = matches!(e.device_jobs[job], DeviceJob::Pending { respond: true });
                if respond {
                    let at = now + e.link.delay();
                    e.schedule(at, Event::Response { job, sample, frame: frame.clone() });
                }
                e.device_jobs[job] = DeviceJob::Finished { sample, frame };
                e.start_next(now)?;
            }
            Event::Response { job, sample, frame } => {
                let share =
                    decode_share(&frame).map_err(|_| SessionError::Config("controller received a corrupt frame"))?;
                if e.answered[job].is_some() || share.extranonce2 != e.jobs[job].extranonce2 {
                    e.duplicates += 1;
                    continue;
                }
                let t_send = e.t_send[job].expect("sent before answered");
                let record = HandshakeRecord {
                    extranonce2: share.extranonce2,
                    t_send_ns: t_send,
                    t_recv_ns: now,
                    delta_t_ns: now - t_send,
                    difficulty: sample.difficulty,
                    temperature: sample.temperature,
                };
                e.answered[job] = Some((record, share));
                done += 1;
                outstanding -= 1;
                if outstanding == 0 && next < n {
                    dispatch(&mut e, &mut next, &mut outstanding, now + 1);
                }
            }
            Event::Timeout { job, attempt } => {
                if e.answered[job].is_some() || attempt != e.attempts[job] {
                    continue;
                }
                if attempt > channel.max_retransmits {
                    return Err(SessionError::Unresponsive {
                        extranonce2: e.jobs[job].extranonce2,
                        attempts: attempt,
                        partial: e.partial(),
                    });
                }
                e.send(job, attempt + 1, now);
            }
        }
    }

    let (records, shares) = e.answered.into_iter().map(|a| a.expect("all answered")).unzip();
    Ok(SessionReport { records, shares, attempts: e.attempts, duplicates: e.duplicates })
}

/// Jobs on one template, one per payload, with sequential extranonce2.
pub fn session_jobs(template: HeaderTemplate, difficulty: f64, payloads: impl IntoIterator<Item = u16>) -> Vec<Job> {
    payloads
        .into_iter()
        .enumerate()
        .map(|(i, p)| Job::new(template, Job::extranonce2_for(p, i as u64), difficulty))
        .collect()
}

/// Template a session draws from its seed.
pub fn session_template(seed: u64) -> HeaderTemplate {
    HeaderTemplate::random(&mut stream(seed, purpose::TEMPLATE))
}

/// Blocking handshake session of `n_jobs` zero-drive jobs.
pub fn run_swh_session(
    twin: &mut Twin,
    channel: &ChannelConfig,
    n_jobs: usize,
    difficulty: f64,
    seed: u64,
) -> Result<Vec<HandshakeRecord>, SessionError> {
    let jobs = session_jobs(session_template(seed), difficulty, std::iter::repeat_n(0, n_jobs));
    Ok(run_session(twin, channel, &jobs, 1, seed)?.records)
}

/// Pipelined session with the given depth; same job stream as
/// [`run_swh_session`] under the same seed.
pub fn run_monologue_session(
    twin: &mut Twin,
    channel: &ChannelConfig,
    n_jobs: usize,
    difficulty: f64,
    depth: usize,
    seed: u64,
) -> Result<Vec<HandshakeRecord>, SessionError> {
    let jobs = session_jobs(session_template(seed), difficulty, std::iter::repeat_n(0, n_jobs));
    Ok(run_session(twin, channel, &jobs, depth, seed)?.records)
}

pub const SESSION_LOG_HEADER: &str = "extranonce2,t_send_ns,t_recv_ns,delta_t_ns,difficulty,temperature";

pub fn write_session_log(records: &[HandshakeRecord]) -> String {
    let mut out = String::from(SESSION_LOG_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{:016x},{},{},{},{},{}",
            r.extranonce2, r.t_send_ns, r.t_recv_ns, r.delta_t_ns, r.difficulty, r.temperature
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sha_twin::DeviceProfile;

    fn twin() -> Twin {
        Twin::new(DeviceProfile::lv06(), 5).unwrap()
    }

    #[test]
    fn ideal_channel_measures_compute_time_exactly() {
        let jobs = session_jobs(session_template(1), 16.0, [0, 100, 200]);
        let mut reference = twin();
        let expected: Vec<u64> = jobs.iter().map(|j| reference.run_job(j, 128).unwrap().sample.delta_t_ns).collect();
        let mut t = twin();
        let report = run_session(&mut t, &ChannelConfig::ideal(), &jobs, 1, 1).unwrap();
        let got: Vec<u64> = report.records.iter().map(|r| r.delta_t_ns).collect();
        assert_eq!(got, expected);
        assert_eq!(report.records.len(), 3);
        for w in report.records.windows(2) {
            assert!(w[0].t_recv_ns < w[1].t_send_ns);
        }
    }

    #[test]
    fn rejects_bad_sessions() {
        let mut t = twin();
        assert!(matches!(run_session(&mut t, &ChannelConfig::ideal(), &[], 1, 0), Err(SessionError::Config(_))));
        let j = session_jobs(session_template(0), 1.0, [0]);
        assert!(run_session(&mut t, &ChannelConfig::ideal(), &j, 0, 0).is_err());
        let dup = vec![j[0], j[0]];
        assert!(run_session(&mut t, &ChannelConfig::ideal(), &dup, 1, 0).is_err());
    }

    #[test]
    fn unresponsive_device_returns_partial_records() {
        let cfg = ChannelConfig {
            loss_probability: 0.9,
            retransmit_timeout_ns: 1_000,
            max_retransmits: 2,
            ..ChannelConfig::ideal()
        };
        let mut t = twin();
        let err = run_swh_session(&mut t, &cfg, 50, 4.0, 3).unwrap_err();
        match &err {
            SessionError::Unresponsive { attempts, .. } => assert_eq!(*attempts, 3),
            other => panic!("{other:?}"),
        }
        assert!(err.partial().len() < 50);
    }

    #[test]
    fn log_format() {
        let r = HandshakeRecord {
            extranonce2: 10,
            t_send_ns: 1,
            t_recv_ns: 5,
            delta_t_ns: 4,
            difficulty: 16.0,
            temperature: 41.0,
        };
        assert_eq!(write_session_log(&[r]), format!("{SESSION_LOG_HEADER}\n000000000000000a,1,5,4,16,41\n"));
    }
}
