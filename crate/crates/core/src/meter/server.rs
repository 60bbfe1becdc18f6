use super::clock::MeterClock;
use super::state::{MeterSource, MeterState};
use crate::modbus::transport::{read_frame, FrameReadError};
use crate::modbus::{
    decode_frame, encode_frame, encode_registers, DecodeError, ExceptionCode, MbapHeader, Pdu,
    RegisterMap,
};
use crate::series::PowerSample;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio::time::MissedTickBehavior;
use tokio_util::sync::CancellationToken;
use tracing::{debug, info, warn};

/// Unprivileged stand-in for Modbus's well-known port 502.
pub const DEFAULT_PORT: u16 = 1502;

#[derive(Debug, Error)]
pub enum MeterError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("meter source has no readings")]
    EmptySource,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct MeterConfig {
    pub bind: SocketAddr,
    /// Stop serving a couple of sample periods after the last reading.
    pub exit_at_end: bool,
    pub map: RegisterMap,
}

impl MeterConfig {
    pub fn new(bind: SocketAddr) -> Self {
        Self {
            bind,
            exit_at_end: false,
            map: RegisterMap::standard(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeterSummary {
    pub final_snapshot: PowerSample,
    pub final_sim_ms: i64,
    pub requests: u64,
    pub connections: u64,
}

struct Shared {
    state: Mutex<MeterState>,
    clock: MeterClock,
    map: RegisterMap,
    requests: AtomicU64,
}

impl Shared {
    /// Advances to the clock's current instant and copies one snapshot out.
    fn snapshot(&self) -> PowerSample {
        let mut state = self.state.lock().expect("meter state poisoned");
        state.advance(self.clock.now_ms());
        state.snapshot()
    }
}

pub struct MeterServer {
    listener: TcpListener,
    shared: Arc<Shared>,
    exit_at_end: bool,
}

impl MeterServer {
    pub async fn bind(
        source: MeterSource,
        clock: MeterClock,
        config: MeterConfig,
    ) -> Result<Self, MeterError> {
        if source.readings.is_empty() {
            return Err(MeterError::EmptySource);
        }
        let listener = TcpListener::bind(config.bind)
            .await
            .map_err(|source| MeterError::Bind {
                addr: config.bind,
                source,
            })?;
        Ok(Self {
            listener,
            shared: Arc::new(Shared {
                state: Mutex::new(MeterState::new(Arc::new(source))),
                clock,
                map: config.map,
                requests: AtomicU64::new(0),
            }),
            exit_at_end: config.exit_at_end,
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn clock(&self) -> MeterClock {
        self.shared.clock
    }

    /// Serves until `shutdown` fires (or the scenario ends, with `exit_at_end`).
    pub async fn run(self, shutdown: CancellationToken) -> Result<MeterSummary, MeterError> {
        let shared = self.shared.clone();
        let (period_ms, end_ms) = {
            let state = shared.state.lock().expect("meter state poisoned");
            (state.source().period_ms.max(1), state.source().end_ms())
        };
        let stop = shutdown.child_token();

        let ticker = {
            let shared = shared.clone();
            let stop = stop.clone();
            let exit_at_end = self.exit_at_end;
            let tick = shared
                .clock
                .wall_duration(period_ms)
                .max(std::time::Duration::from_millis(1));
            tokio::spawn(async move {
                let mut interval = tokio::time::interval(tick);
                interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
                loop {
                    tokio::select! {
                        _ = stop.cancelled() => break,
                        _ = interval.tick() => {}
                    }
                    let now = shared.clock.now_ms();
                    shared
                        .state
                        .lock()
                        .expect("meter state poisoned")
                        .advance(now);
                    if exit_at_end && now >= end_ms + 2 * period_ms {
                        info!(sim_ms = now, "scenario finished, stopping meter");
                        stop.cancel();
                        break;
                    }
                }
            })
        };

        let mut connections = 0u64;
        loop {
            tokio::select! {
                _ = stop.cancelled() => break,
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        connections += 1;
                        debug!(%peer, "client connected");
                        let shared = shared.clone();
                        let stop = stop.clone();
                        tokio::spawn(async move {
                            tokio::select! {
                                _ = stop.cancelled() => {}
                                result = handle_client(stream, &shared) => match result {
                                    Ok(()) => debug!(%peer, "client disconnected"),
                                    Err(e) => warn!(%peer, error = %e, "client dropped"),
                                },
                            }
                        });
                    }
                    Err(e) => warn!(error = %e, "accept failed"),
                },
            }
        }
        stop.cancel();
        let _ = ticker.await;

        let state = shared.state.lock().expect("meter state poisoned");
        Ok(MeterSummary {
            final_snapshot: state.snapshot(),
            final_sim_ms: state.now_ms(),
            requests: shared.requests.load(Ordering::Relaxed),
            connections,
        })
    }
}

async fn handle_client(mut stream: TcpStream, shared: &Shared) -> Result<(), FrameReadError> {
    stream.set_nodelay(true)?;
    loop {
        let frame = match read_frame(&mut stream).await {
            Ok(f) => f,
            Err(FrameReadError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        };
        shared.requests.fetch_add(1, Ordering::Relaxed);
        if let Some(reply) = respond(&frame, shared) {
            stream.write_all(&reply).await?;
        }
    }
}

fn exception(header: &MbapHeader, function: u8, code: ExceptionCode) -> Option<Vec<u8>> {
    if function == 0 || function >= 0x80 {
        return None;
    }
    encode_frame(header, &Pdu::Exception { function, code }).ok()
}

/// Builds the reply for one request frame; `None` means no sane reply exists
/// (the frame cannot be attributed to a function).
fn respond(frame: &[u8], shared: &Shared) -> Option<Vec<u8>> {
    let header_of = |f: &[u8]| MbapHeader::new(u16::from_be_bytes([f[0], f[1]]), f[6]);
    match decode_frame(frame) {
        Ok((
            header,
            Pdu::ReadRequest {
                function,
                start_address,
                quantity,
            },
        )) => {
            let snapshot = shared.snapshot();
            let image = encode_registers(&snapshot, &shared.map);
            match image.read(start_address, quantity) {
                Ok(registers) => encode_frame(
                    &header,
                    &Pdu::ReadResponse {
                        function,
                        registers,
                    },
                )
                .ok(),
                Err(_) => exception(
                    &header,
                    function.code(),
                    ExceptionCode::ILLEGAL_DATA_ADDRESS,
                ),
            }
        }
        Ok((header, pdu)) => exception(
            &header,
            pdu.function_byte() & 0x7F,
            ExceptionCode::ILLEGAL_FUNCTION,
        ),
        Err(DecodeError::UnknownFunction(fc)) => {
            exception(&header_of(frame), fc, ExceptionCode::ILLEGAL_FUNCTION)
        }
        Err(DecodeError::InvalidQuantity(_))
        | Err(DecodeError::ByteCountMismatch { .. })
        | Err(DecodeError::MalformedPdu { .. }) => exception(
            &header_of(frame),
            frame[7] & 0x7F,
            ExceptionCode::ILLEGAL_DATA_VALUE,
        ),
        Err(e) => {
            debug!(error = %e, "unanswerable frame");
            None
        }
    }
}
