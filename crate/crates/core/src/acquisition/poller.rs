use super::store::{StoreError, StoreWriter};
use crate::modbus::transport::read_frame;
use crate::modbus::{decode_frame, decode_registers, encode_frame, MbapHeader, Pdu, RegisterMap};
use crate::series::{Millis, PowerSample};
use std::collections::VecDeque;
use std::net::SocketAddr;
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio_util::sync::CancellationToken;
use tracing::{debug, info, warn};

#[derive(Debug, Clone)]
pub struct PollConfig {
    pub meter: SocketAddr,
    /// Sampling rate in meter-simulated time.
    pub rate_hz: f64,
    pub unit_id: u8,
    pub request_timeout: Duration,
    /// Attempts after the first before a tick is given up.
    pub retries: u32,
    pub backoff_initial: Duration,
    pub backoff_max: Duration,
    /// Stop once a sample at or after this simulated instant is stored.
    pub until_ms: Option<Millis>,
    /// Stop when the meter has been unreachable this long (wall time).
    pub give_up_after: Option<Duration>,
    pub map: RegisterMap,
}

impl PollConfig {
    pub fn new(meter: SocketAddr) -> Self {
        Self {
            meter,
            rate_hz: 1.0,
            unit_id: 1,
            request_timeout: Duration::from_millis(500),
            retries: 3,
            backoff_initial: Duration::from_millis(20),
            backoff_max: Duration::from_millis(250),
            until_ms: None,
            give_up_after: None,
            map: RegisterMap::standard(),
        }
    }

    pub fn period_ms(&self) -> Millis {
        (1000.0 / self.rate_hz).round().max(1.0) as Millis
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PollSummary {
    pub samples: usize,
    pub gaps: Vec<(Millis, Millis)>,
    pub codec_errors: u64,
    pub timeouts: u64,
    pub connects: u64,
    pub last_t_ms: Option<Millis>,
}

impl PollSummary {
    pub fn gap_ms(&self) -> Millis {
        self.gaps.iter().map(|(a, b)| b - a).sum()
    }
}

#[derive(Debug, Error)]
pub enum PollError {
    #[error("poll rate must be positive, got {0}")]
    BadRate(f64),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
enum RequestFailure {
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("codec: {0}")]
    Codec(String),
}

/// Learns how fast meter time runs against wall time from the instants at
/// which new snapshots were first observed, and wakes shortly before the next
/// expected snapshot; early reads are simply retried.
///
/// An observation always trails the snapshot's true appearance, so the
/// schedule is anchored to the observation that trailed least among the
/// recent ones.
#[derive(Debug, Default)]
struct Pacer {
    first: Option<(Millis, Instant)>,
    recent: VecDeque<(Millis, Instant)>,
}

const PACER_WINDOW: usize = 64;

impl Pacer {
    fn observe(&mut self, t_ms: Millis, wall: Instant) {
        self.first.get_or_insert((t_ms, wall));
        if self.recent.len() == PACER_WINDOW {
            self.recent.pop_front();
        }
        self.recent.push_back((t_ms, wall));
    }

    fn wall_per_sim_ms(&self) -> Option<f64> {
        let ((t0, w0), (t1, w1)) = (self.first?, *self.recent.back()?);
        (t1 > t0).then(|| (w1 - w0).as_secs_f64() / (t1 - t0) as f64)
    }

    /// Earliest wall instant consistent with the recent observations at
    /// which meter time `t_ms` appears.
    fn wall_at(&self, t_ms: Millis, slope: f64) -> Option<Instant> {
        self.recent
            .iter()
            .map(|&(t, w)| {
                let ahead = (t_ms - t) as f64 * slope;
                if ahead >= 0.0 {
                    w + Duration::from_secs_f64(ahead)
                } else {
                    w.checked_sub(Duration::from_secs_f64(-ahead)).unwrap_or(w)
                }
            })
            .min()
    }

    fn estimate_sim_now(&self, now: Instant) -> Option<Millis> {
        let (t1, w1) = *self.recent.back()?;
        let slope = self.wall_per_sim_ms()?;
        Some(t1 + ((now - w1).as_secs_f64() / slope) as Millis)
    }

    /// Sleep before the next read once a sample was stored.
    fn after_sample(&self, next_due: Millis, period_ms: Millis, now: Instant) -> Duration {
        match self.wall_per_sim_ms() {
            Some(slope) => {
                let aim = next_due as f64 - 0.15 * period_ms as f64;
                let target = self.wall_at(aim.round() as Millis, slope).unwrap_or(now);
                target
                    .saturating_duration_since(now)
                    .max(Duration::from_millis(1))
            }
            None => Duration::from_millis(5),
        }
    }

    /// Sleep when the meter has not produced the wanted instant yet.
    fn retry_soon(&self, period_ms: Millis) -> Duration {
        match self.wall_per_sim_ms() {
            Some(slope) => Duration::from_secs_f64(period_ms as f64 * slope / 20.0)
                .clamp(Duration::from_millis(1), Duration::from_millis(50)),
            None => Duration::from_millis(5),
        }
    }
}

async fn request_snapshot(
    stream: &mut TcpStream,
    config: &PollConfig,
    transaction_id: u16,
) -> Result<PowerSample, RequestFailure> {
    let (start, quantity) = config.map.full_block();
    let request = encode_frame(
        &MbapHeader::new(transaction_id, config.unit_id),
        &Pdu::read_holding(start, quantity),
    )
    .map_err(|e| RequestFailure::Codec(e.to_string()))?;
    let exchange = async {
        stream.write_all(&request).await?;
        read_frame(stream).await.map_err(std::io::Error::other)
    };
    let frame = match tokio::time::timeout(config.request_timeout, exchange).await {
        Err(_) => return Err(RequestFailure::Timeout),
        Ok(Err(e)) => return Err(RequestFailure::Transport(e.to_string())),
        Ok(Ok(f)) => f,
    };
    let (header, pdu) = decode_frame(&frame).map_err(|e| RequestFailure::Codec(e.to_string()))?;
    if header.transaction_id != transaction_id {
        return Err(RequestFailure::Transport(format!(
            "transaction id {} answered with {}",
            transaction_id, header.transaction_id
        )));
    }
    match pdu {
        Pdu::ReadResponse { registers, .. } => decode_registers(start, &registers, &config.map)
            .map_err(|e| RequestFailure::Codec(e.to_string())),
        Pdu::Exception { code, .. } => {
            Err(RequestFailure::Codec(format!("meter exception {code}")))
        }
        other => Err(RequestFailure::Codec(format!("unexpected pdu {other:?}"))),
    }
}

async fn sleep_or_stop(d: Duration, stop: &CancellationToken) -> bool {
    tokio::select! {
        _ = stop.cancelled() => true,
        _ = tokio::time::sleep(d) => false,
    }
}

/// Polls the meter at `config.rate_hz` (meter-simulated time) and appends
/// each new snapshot to `store`, stamped with the meter's own snapshot time.
///
/// Unreachable or misbehaving meters never stall the loop: failed requests
/// are retried with capped backoff, and any sample instants that could not
/// be acquired are written as one gap marker once the next sample arrives.
pub async fn poll_loop(
    config: &PollConfig,
    store: &mut StoreWriter,
    stop: CancellationToken,
) -> Result<PollSummary, PollError> {
    if !(config.rate_hz.is_finite() && config.rate_hz > 0.0) {
        return Err(PollError::BadRate(config.rate_hz));
    }
    let period_ms = config.period_ms();
    let mut summary = PollSummary::default();
    let mut pacer = Pacer::default();
    let mut conn: Option<TcpStream> = None;
    let mut transaction_id: u16 = 0;
    let mut next_due: Option<Millis> = None;
    let mut failures: u32 = 0;
    let mut unreachable_since: Option<Instant> = None;
    let mut gave_up = false;

    'poll: while !stop.is_cancelled() {
        if let (Some(since), Some(limit)) = (unreachable_since, config.give_up_after) {
            if since.elapsed() >= limit {
                info!("meter unreachable for {:?}, giving up", limit);
                gave_up = true;
                break;
            }
        }
        let backoff = config
            .backoff_initial
            .saturating_mul(1 << failures.min(10))
            .min(config.backoff_max);

        let stream = match conn.as_mut() {
            Some(s) => s,
            None => {
                match tokio::time::timeout(config.request_timeout, TcpStream::connect(config.meter))
                    .await
                {
                    Ok(Ok(s)) => {
                        let _ = s.set_nodelay(true);
                        summary.connects += 1;
                        debug!(meter = %config.meter, "connected");
                        conn.insert(s)
                    }
                    outcome => {
                        if outcome.is_err() {
                            summary.timeouts += 1;
                        }
                        failures += 1;
                        unreachable_since.get_or_insert_with(Instant::now);
                        if sleep_or_stop(backoff, &stop).await {
                            break 'poll;
                        }
                        continue;
                    }
                }
            }
        };

        transaction_id = transaction_id.wrapping_add(1);
        let sample = match request_snapshot(stream, config, transaction_id).await {
            Ok(s) => s,
            Err(failure) => {
                match failure {
                    RequestFailure::Codec(ref e) => {
                        summary.codec_errors += 1;
                        warn!(error = %e, "dropping undecodable reply");
                    }
                    RequestFailure::Timeout => summary.timeouts += 1,
                    RequestFailure::Transport(ref e) => debug!(error = %e, "transport failure"),
                }
                // The stream may hold a late reply; start clean.
                conn = None;
                failures += 1;
                if failures > config.retries {
                    unreachable_since.get_or_insert_with(Instant::now);
                }
                if sleep_or_stop(backoff, &stop).await {
                    break 'poll;
                }
                continue;
            }
        };
        failures = 0;
        unreachable_since = None;

        let now = Instant::now();
        if next_due.is_some_and(|due| sample.t_ms < due) {
            if sleep_or_stop(pacer.retry_soon(period_ms), &stop).await {
                break;
            }
            continue;
        }
        if let Some(due) = next_due {
            if sample.t_ms >= due + period_ms {
                store.append_gap(due, sample.t_ms)?;
                summary.gaps.push((due, sample.t_ms));
                warn!(from_ms = due, to_ms = sample.t_ms, "gap in acquisition");
            }
        }
        store.append_sample(&sample)?;
        summary.samples += 1;
        summary.last_t_ms = Some(sample.t_ms);
        pacer.observe(sample.t_ms, now);
        let due = sample.t_ms + period_ms;
        next_due = Some(due);
        if config.until_ms.is_some_and(|until| sample.t_ms >= until) {
            break;
        }
        if sleep_or_stop(pacer.after_sample(due, period_ms, Instant::now()), &stop).await {
            break;
        }
    }

    // An outage still running at an external stop is recorded up to the
    // estimated meter time; a meter that went away for good just ends the store.
    if let (false, Some(due), Some(since)) = (gave_up, next_due, unreachable_since) {
        if let Some(sim_now) = pacer.estimate_sim_now(Instant::now()) {
            let end = due + (sim_now - due).div_euclid(period_ms) * period_ms;
            if end > due {
                store.append_gap(due, end)?;
                summary.gaps.push((due, end));
                debug!(outage = ?since.elapsed(), "trailing gap recorded");
            }
        }
    }
    Ok(summary)
}
