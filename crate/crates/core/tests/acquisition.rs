mod common;

use nilmlab::acquisition::{poll_loop, PollConfig, StoreMeta, StoreWriter, StoredSeries};
use nilmlab::meter::{MeterClock, MeterConfig, MeterServer, MeterSource, Reading};
use std::net::SocketAddr;
use std::time::{Duration, Instant};
use tokio_util::sync::CancellationToken;

// Timing-sensitive: keep the polling tests off each other's toes.
static SERIAL: tokio::sync::Mutex<()> = tokio::sync::Mutex::const_new(());

fn ramp_source(seconds: i64) -> MeterSource {
    MeterSource {
        name: "ramp".into(),
        period_ms: 1000,
        readings: (0..seconds)
            .map(|k| Reading::from_active(k * 1000, 100.0 + k as f64, 0.95, 230.0))
            .collect(),
    }
}

async fn spawn_meter(
    addr: SocketAddr,
    clock: MeterClock,
    source: MeterSource,
) -> (SocketAddr, CancellationToken) {
    let server = MeterServer::bind(source, clock, MeterConfig::new(addr))
        .await
        .unwrap();
    let bound = server.local_addr().unwrap();
    let shutdown = CancellationToken::new();
    tokio::spawn(server.run(shutdown.clone()));
    (bound, shutdown)
}

#[tokio::test(flavor = "multi_thread")]
async fn one_minute_at_ten_times_speed() {
    let _serial = SERIAL.lock().await;
    let (addr, shutdown) = spawn_meter(
        SocketAddr::from(([127, 0, 0, 1], 0)),
        MeterClock::new(10.0),
        ramp_source(120),
    )
    .await;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.csv");
    let mut writer = StoreWriter::create(&path, &StoreMeta::new().with("meter", addr)).unwrap();
    let mut config = PollConfig::new(addr);
    config.until_ms = Some(59_000);
    let summary = poll_loop(&config, &mut writer, CancellationToken::new())
        .await
        .unwrap();
    drop(writer);
    shutdown.cancel();

    let stored = StoredSeries::open(&path).unwrap();
    let count = stored.samples().count();
    assert!(count.abs_diff(60) <= 1, "{count} samples");
    assert_eq!(summary.samples, count);
    // Timestamps come from the meter, so they sit on its 1 s grid.
    for s in stored.samples() {
        assert_eq!(s.t_ms % 1000, 0);
        assert_eq!(s.active_w, 100.0 + (s.t_ms / 1000) as f64);
    }
    let t: Vec<_> = stored.samples().map(|s| s.t_ms).collect();
    assert!(t.windows(2).all(|w| w[0] < w[1]));
}

#[tokio::test(flavor = "multi_thread")]
async fn meter_outage_leaves_a_gap_marker() {
    let _serial = SERIAL.lock().await;
    let clock = MeterClock::new(10.0);
    let (addr, first) = spawn_meter(
        SocketAddr::from(([127, 0, 0, 1], 0)),
        clock,
        ramp_source(120),
    )
    .await;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.csv");
    let mut config = PollConfig::new(addr);
    config.until_ms = Some(40_000);
    config.backoff_max = Duration::from_millis(40);
    let poller = tokio::spawn(async move {
        let mut writer = StoreWriter::create(&path, &StoreMeta::new()).unwrap();
        let summary = poll_loop(&config, &mut writer, CancellationToken::new())
            .await
            .unwrap();
        (summary, path, writer)
    });

    // Down from roughly 15 s to 20 s of meter time, same clock afterwards.
    tokio::time::sleep_until((clock.origin() + clock.wall_duration(15_000)).into()).await;
    first.cancel();
    tokio::time::sleep_until((clock.origin() + clock.wall_duration(20_000)).into()).await;
    let (_, second) = spawn_meter(addr, clock, ramp_source(120)).await;

    let (summary, path, writer) = poller.await.unwrap();
    drop(writer);
    second.cancel();
    assert!(summary.connects >= 2);
    assert_eq!(summary.gaps.len(), 1, "{:?}", summary.gaps);
    let (from, to) = summary.gaps[0];
    assert!((14_000..=17_000).contains(&from), "gap starts at {from}");
    assert!(
        (4_000..=7_000).contains(&(to - from)),
        "gap of {} ms",
        to - from
    );

    let stored = StoredSeries::open(&path).unwrap();
    assert_eq!(stored.gaps().collect::<Vec<_>>(), summary.gaps);
    // Nothing is interpolated inside the gap.
    assert!(stored.samples().all(|s| s.t_ms < from || s.t_ms >= to));
}

#[tokio::test]
async fn unreachable_meter_gives_up() {
    let _serial = SERIAL.lock().await;
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    let mut writer = StoreWriter::create(dir.path().join("store.csv"), &StoreMeta::new()).unwrap();
    let mut config = PollConfig::new(addr);
    config.give_up_after = Some(Duration::from_millis(300));
    let started = Instant::now();
    let summary = poll_loop(&config, &mut writer, CancellationToken::new())
        .await
        .unwrap();
    assert_eq!(summary.samples, 0);
    assert!(started.elapsed() < Duration::from_secs(3));
}
