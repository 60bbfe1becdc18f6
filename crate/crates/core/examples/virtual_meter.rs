//! Serves the household on a local port at 60x speed and reads it like a
//! SCADA master would, once per simulated second, for half a simulated minute.

use nilmlab::meter::{MeterClock, MeterConfig, MeterServer, MeterSource};
use nilmlab::modbus::transport::read_frame;
use nilmlab::modbus::{
    decode_frame, decode_registers, encode_frame, MbapHeader, Pdu, ReadFunction, RegisterMap,
};
use nilmlab::sim::{simulate, Scenario};
use std::net::SocketAddr;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio_util::sync::CancellationToken;

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/table1.json");
const ACCEL: f64 = 60.0;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(SCENARIO)?;
    let sim = simulate(&scenario)?;
    let clock = MeterClock::new(ACCEL).starting_at(45_000);
    let server = MeterServer::bind(
        MeterSource::from_simulation(&scenario, &sim),
        clock,
        MeterConfig::new(SocketAddr::from(([127, 0, 0, 1], 0))),
    )
    .await?;
    let addr = server.local_addr()?;
    println!("meter listening on {addr}");
    let shutdown = CancellationToken::new();
    let meter = tokio::spawn(server.run(shutdown.clone()));

    let map = RegisterMap::standard();
    let (start, quantity) = map.full_block();
    let mut stream = TcpStream::connect(addr).await?;
    println!(
        "{:>7} {:>9} {:>9} {:>7} {:>9}",
        "t [s]", "P [W]", "Q [var]", "I [A]", "E [Wh]"
    );
    let mut next_ms = 45_000;
    for tid in 1..=30u16 {
        let request = encode_frame(
            &MbapHeader::new(tid, 1),
            &Pdu::ReadRequest {
                function: ReadFunction::InputRegisters,
                start_address: start,
                quantity,
            },
        )?;
        stream.write_all(&request).await?;
        let (_, pdu) = decode_frame(&read_frame(&mut stream).await?)?;
        if let Pdu::ReadResponse { registers, .. } = pdu {
            let s = decode_registers(start, &registers, &map)?;
            println!(
                "{:>7.0} {:>9.1} {:>9.1} {:>7.3} {:>9.3}",
                s.t_ms as f64 / 1000.0,
                s.active_w,
                s.reactive_var,
                s.current_a,
                s.energy_wh
            );
        }
        // Aim a little after the next snapshot appears.
        next_ms += 1000;
        tokio::time::sleep_until(
            (clock.origin() + clock.wall_duration(next_ms - 45_000 + 100)).into(),
        )
        .await;
    }

    shutdown.cancel();
    let summary = meter.await??;
    println!(
        "served {} requests over {} connection(s)",
        summary.requests, summary.connections
    );
    Ok(())
}
