mod common;

use common::*;
use nilmlab::modbus::{
    decode_registers, encode_frame, encode_registers, MbapHeader, Pdu, Quantity, RegisterMap,
};
use nilmlab::PowerSample;

#[test]
fn golden_vectors_decode_and_reencode() {
    assert_eq!(check_golden_vectors().unwrap(), golden_expectations().len());
}

#[test]
fn decoder_survives_random_frames() {
    let stats = fuzz_decoder(50_000, 17).unwrap();
    assert_eq!(stats.frames, 50_000);
    assert_eq!(stats.ok + stats.rejected, stats.frames);
    assert!(stats.ok > 0, "fuzzer never produced a valid frame");
}

#[test]
fn voltage_is_sent_high_word_first() {
    let map = RegisterMap::standard();
    let sample = PowerSample {
        t_ms: 0,
        active_w: 0.0,
        reactive_var: 0.0,
        voltage_v: 230.0,
        current_a: 0.0,
        energy_wh: 0.0,
    };
    let image = encode_registers(&sample, &map);
    let v = map.entry(Quantity::Voltage).unwrap().address;
    assert_eq!(image.read(v, 2).unwrap(), vec![0x4366, 0x0000]);

    let reply = Pdu::ReadResponse {
        function: nilmlab::modbus::ReadFunction::HoldingRegisters,
        registers: image.read(v, 2).unwrap(),
    };
    assert_eq!(
        encode_frame(&MbapHeader::new(1, 1), &reply).unwrap(),
        fixture("voltage_response")
    );
}

#[test]
fn full_block_decodes_to_the_sample() {
    let map = RegisterMap::standard();
    let sample = PowerSample {
        t_ms: 60_000,
        active_w: 2100.0,
        reactive_var: 700.0,
        voltage_v: 230.0,
        current_a: 9.5,
        energy_wh: 12.25,
    };
    let (start, quantity) = map.full_block();
    assert_eq!((start, quantity), (0, 12));
    let registers = encode_registers(&sample, &map)
        .read(start, quantity)
        .unwrap();
    assert_eq!(decode_registers(start, &registers, &map).unwrap(), sample);
}
