//! Encodes a meter snapshot into registers and Modbus TCP frames, then
//! decodes them again. Prints every frame as hex.

use nilmlab::modbus::{
    decode_frame, decode_registers, encode_frame, encode_registers, ExceptionCode, MbapHeader, Pdu,
    ReadFunction, RegisterMap,
};
use nilmlab::PowerSample;

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02X}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = RegisterMap::standard();
    for e in map.entries() {
        println!("0x{:04X}  {:?} ({:?})", e.address, e.quantity, e.encoding);
    }

    let sample = PowerSample {
        t_ms: 60_000,
        active_w: 2100.0,
        reactive_var: 700.0,
        voltage_v: 230.0,
        current_a: 9.5,
        energy_wh: 12.25,
    };
    let image = encode_registers(&sample, &map);
    let (start, quantity) = map.full_block();

    let request = encode_frame(
        &MbapHeader::new(42, 1),
        &Pdu::ReadRequest {
            function: ReadFunction::HoldingRegisters,
            start_address: start,
            quantity,
        },
    )?;
    println!("\nrequest   {}", hex(&request));

    let registers = image.read(start, quantity)?;
    let response = encode_frame(
        &MbapHeader::new(42, 1),
        &Pdu::ReadResponse {
            function: ReadFunction::HoldingRegisters,
            registers,
        },
    )?;
    println!("response  {}", hex(&response));

    let (header, pdu) = decode_frame(&response)?;
    if let Pdu::ReadResponse { registers, .. } = pdu {
        let back = decode_registers(start, &registers, &map)?;
        println!("decoded   tid={} {back:?}", header.transaction_id);
    }

    let exception = encode_frame(
        &MbapHeader::new(43, 1),
        &Pdu::Exception {
            function: 0x03,
            code: ExceptionCode::ILLEGAL_DATA_ADDRESS,
        },
    )?;
    println!(
        "exception {}  -> {:?}",
        hex(&exception),
        decode_frame(&exception)?.1
    );

    let truncated = &response[..response.len() - 2];
    println!("truncated -> {}", decode_frame(truncated).unwrap_err());
    Ok(())
}
