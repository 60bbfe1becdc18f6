//! Helpers and property checks shared by the integration tests and the
//! acceptance run.

#![allow(dead_code)]

use nilmlab::acquisition::{StoreEntry, StoreMeta, StoreWriter, StoredSeries};
use nilmlab::disagg::{
    track_states, DetectedEvent, Detector, Signature, SignatureTable, UNKNOWN_LABEL,
};
use nilmlab::modbus::{
    decode_frame, decode_registers, encode_frame, encode_registers, DecodeError, ExceptionCode,
    MbapHeader, Pdu, ReadFunction, RegisterMap,
};
use nilmlab::sim::{
    simulate, ActionVerb, ApplianceModel, LoadKind, Scenario, ScenarioAction, ThermostatParams,
};
use nilmlab::watchdog::{build_cycles, detect_anomalies, Anomaly, AnomalyKind, Watchdog};
use nilmlab::{Millis, PowerSample, PowerSeries, Switch};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use std::path::{Path, PathBuf};

/// Appliance rows of the household scenario, in order.
pub const HOUSEHOLD_EVENTS: [(&str, Switch); 16] = [
    ("fridge", Switch::On),
    ("microwave", Switch::On),
    ("microwave", Switch::Off),
    ("monitor", Switch::On),
    ("pc", Switch::On),
    ("kettle", Switch::On),
    ("fridge", Switch::Off),
    ("kettle", Switch::Off),
    ("kettle", Switch::On),
    ("pc", Switch::Off),
    ("monitor", Switch::Off),
    ("ventilator", Switch::On),
    ("kettle", Switch::Off),
    ("fridge", Switch::On),
    ("ventilator", Switch::Off),
    ("fridge", Switch::Off),
];

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("repo root")
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(repo_root().join("scenarios").join(format!("{name}.json")))
        .expect("shipped scenario loads")
}

pub fn signatures() -> SignatureTable {
    SignatureTable::load_csv(repo_root().join("scenarios/signatures.csv"))
        .expect("shipped signatures load")
}

pub fn fridge_only() -> SignatureTable {
    SignatureTable::new(vec![Signature::new("fridge", 120.0).with_spike()]).unwrap()
}

pub fn read_hex(path: &Path) -> Vec<u8> {
    let text = std::fs::read_to_string(path).expect("fixture readable");
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .map(|b| u8::from_str_radix(b, 16).expect("hex byte"))
        .collect()
}

pub fn fixture(name: &str) -> Vec<u8> {
    read_hex(
        &repo_root()
            .join("fixtures/modbus")
            .join(format!("{name}.hex")),
    )
}

pub enum Expect {
    Frame(MbapHeader, Pdu),
    Reject(DecodeError),
}

fn header(transaction_id: u16, length: u16, unit_id: u8) -> MbapHeader {
    MbapHeader {
        transaction_id,
        protocol_id: 0,
        length,
        unit_id,
    }
}

/// What each shipped vector must decode to.
pub fn golden_expectations() -> Vec<(&'static str, Expect)> {
    use Expect::*;
    let f = |x: f32| {
        let b = x.to_bits();
        [(b >> 16) as u16, b as u16]
    };
    let mut block = Vec::new();
    for x in [2100.0f32, 700.0, 230.0, 9.5, 12.25] {
        block.extend(f(x));
    }
    block.extend([(60000u32 >> 16) as u16, 60000u32 as u16]);
    vec![
        (
            "read_holding_request",
            Frame(
                header(1, 6, 1),
                Pdu::ReadRequest {
                    function: ReadFunction::HoldingRegisters,
                    start_address: 0,
                    quantity: 12,
                },
            ),
        ),
        (
            "read_input_request",
            Frame(
                header(0x1234, 6, 0xFF),
                Pdu::ReadRequest {
                    function: ReadFunction::InputRegisters,
                    start_address: 2,
                    quantity: 2,
                },
            ),
        ),
        (
            "voltage_response",
            Frame(
                header(1, 7, 1),
                Pdu::ReadResponse {
                    function: ReadFunction::HoldingRegisters,
                    registers: vec![0x4366, 0x0000],
                },
            ),
        ),
        (
            "full_block_response",
            Frame(
                header(0x2A, 27, 1),
                Pdu::ReadResponse {
                    function: ReadFunction::HoldingRegisters,
                    registers: block,
                },
            ),
        ),
        (
            "exception_illegal_address",
            Frame(
                header(7, 3, 1),
                Pdu::Exception {
                    function: 0x03,
                    code: ExceptionCode::ILLEGAL_DATA_ADDRESS,
                },
            ),
        ),
        (
            "exception_illegal_function",
            Frame(
                header(8, 3, 1),
                Pdu::Exception {
                    function: 0x06,
                    code: ExceptionCode::ILLEGAL_FUNCTION,
                },
            ),
        ),
        ("bad_protocol_id", Reject(DecodeError::ProtocolId(1))),
        (
            "length_mismatch",
            Reject(DecodeError::LengthMismatch {
                declared: 9,
                actual: 6,
            }),
        ),
        (
            "unknown_function",
            Reject(DecodeError::UnknownFunction(0x2B)),
        ),
        ("zero_quantity", Reject(DecodeError::InvalidQuantity(0))),
        (
            "byte_count_mismatch",
            Reject(DecodeError::ByteCountMismatch {
                declared: 6,
                actual: 4,
            }),
        ),
    ]
}

/// Decodes every vector, and re-encodes the valid ones byte for byte.
pub fn check_golden_vectors() -> Result<usize, String> {
    let expectations = golden_expectations();
    let on_disk = std::fs::read_dir(repo_root().join("fixtures/modbus"))
        .map_err(|e| e.to_string())?
        .count();
    if on_disk != expectations.len() {
        return Err(format!(
            "{on_disk} fixture files but {} expectations",
            expectations.len()
        ));
    }
    for (name, expect) in &expectations {
        let bytes = fixture(name);
        match (expect, decode_frame(&bytes)) {
            (Expect::Frame(h, p), Ok((got_h, got_p))) => {
                if (&got_h, &got_p) != (h, p) {
                    return Err(format!("{name}: decoded {got_h:?} {got_p:?}"));
                }
                let encoded = encode_frame(h, p).map_err(|e| format!("{name}: {e}"))?;
                if encoded != bytes {
                    return Err(format!("{name}: re-encoding differs"));
                }
            }
            (Expect::Reject(e), Err(got)) if &got == e => {}
            (_, got) => return Err(format!("{name}: unexpected {got:?}")),
        }
    }
    let regs = match decode_frame(&fixture("full_block_response")) {
        Ok((_, Pdu::ReadResponse { registers, .. })) => registers,
        other => return Err(format!("full block: {other:?}")),
    };
    let s = decode_registers(0, &regs, &RegisterMap::standard()).map_err(|e| e.to_string())?;
    if (
        s.active_w,
        s.reactive_var,
        s.voltage_v,
        s.current_a,
        s.energy_wh,
        s.t_ms,
    ) != (2100.0, 700.0, 230.0, 9.5, 12.25, 60000)
    {
        return Err(format!("full block decodes to {s:?}"));
    }
    Ok(expectations.len())
}

#[derive(Debug, Default)]
pub struct FuzzStats {
    pub frames: usize,
    pub ok: usize,
    pub rejected: usize,
}

/// Feeds random frames to the decoder. Half of them carry a plausible MBAP
/// header so the PDU parser is reached. Every accepted frame must re-encode
/// to the same bytes.
pub fn fuzz_decoder(frames: usize, seed: u64) -> Result<FuzzStats, String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut stats = FuzzStats::default();
    let mut buf = Vec::with_capacity(300);
    for _ in 0..frames {
        buf.clear();
        let len = rng.gen_range(0..=262usize);
        buf.extend((0..len).map(|_| rng.gen::<u8>()));
        if len >= 8 && rng.gen_bool(0.5) {
            buf[2] = 0;
            buf[3] = 0;
            let declared = (len - 6) as u16;
            buf[4..6].copy_from_slice(&declared.to_be_bytes());
            if rng.gen_bool(0.5) {
                buf[7] = [3u8, 4, 0x83, 0x84][rng.gen_range(0..4)];
            }
        }
        stats.frames += 1;
        let outcome = std::panic::catch_unwind(|| decode_frame(&buf))
            .map_err(|_| format!("decoder panicked on {buf:02X?}"))?;
        match outcome {
            Ok((h, p)) => {
                stats.ok += 1;
                let again = encode_frame(&h, &p)
                    .map_err(|e| format!("accepted frame does not re-encode: {e}"))?;
                if again != buf {
                    return Err(format!("accepted frame re-encodes differently: {buf:02X?}"));
                }
            }
            Err(e) => {
                stats.rejected += 1;
                match e {
                    DecodeError::ShortFrame { .. }
                    | DecodeError::ProtocolId(_)
                    | DecodeError::LengthMismatch { .. }
                    | DecodeError::UnknownFunction(_)
                    | DecodeError::InvalidQuantity(_)
                    | DecodeError::ByteCountMismatch { .. }
                    | DecodeError::MalformedPdu { .. } => {}
                }
            }
        }
    }
    Ok(stats)
}

// ---------------------------------------------------------------------------
// Property checks. Each runs `cases` randomized cases and reports the first
// minimized failure.

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn finish<T: std::fmt::Debug>(
    result: Result<(), proptest::test_runner::TestError<T>>,
) -> Result<(), String> {
    result.map_err(|e| e.to_string())
}

fn arb_thermostat() -> impl Strategy<Value = ThermostatParams> {
    (
        0.0..4.0f64,
        0.5..4.0f64,
        0.002..0.05f64,
        0.002..0.05f64,
        1.0..5.0f64,
        0.0..1.0f64,
        any::<bool>(),
    )
        .prop_map(|(low, span, cool, warm, mult, frac, on)| ThermostatParams {
            temp_low_c: low,
            temp_high_c: low + span,
            cool_rate_c_per_s: cool,
            warm_rate_c_per_s: warm,
            door_open_warm_multiplier: mult,
            initial_temp_c: Some(low + frac * span),
            initially_on: on,
        })
}

fn arb_appliance(i: usize) -> impl Strategy<Value = ApplianceModel> {
    let id = format!("a{i}");
    prop_oneof![
        (10.0..3000.0f64).prop_map({
            let id = id.clone();
            move |w| ApplianceModel::constant(id.clone(), w)
        }),
        (20.0..500.0f64, 0.0..20.0f64).prop_map({
            let id = id.clone();
            move |(w, sigma)| ApplianceModel {
                id: id.clone(),
                steady_power_w: w,
                kind: LoadKind::FluctuatingLoad {
                    fluctuation_sigma_w: sigma,
                },
            }
        }),
        (50.0..300.0f64, 0.0..500.0f64, 0.0..3.0f64, arb_thermostat()).prop_map(
            move |(w, extra, dur, thermostat)| ApplianceModel {
                id: id.clone(),
                steady_power_w: w,
                kind: LoadKind::SpikyCycler {
                    spike_peak_w: w + extra,
                    spike_duration_s: dur,
                    thermostat,
                },
            }
        ),
    ]
}

/// Random valid scenario with `noise`.
pub fn arb_scenario(noise: f64) -> impl Strategy<Value = Scenario> {
    (
        0usize..5,
        10.0..600.0f64,
        prop_oneof![Just(1.0), Just(2.0), Just(0.5)],
        0.0..300.0f64,
        any::<u64>(),
    )
        .prop_flat_map(move |(n, duration, rate, baseline, seed)| {
            let apps = (0..n).map(arb_appliance).collect::<Vec<_>>();
            let actions =
                proptest::collection::vec((0.0..duration, 0..n.max(1), 0usize..4), 0..(3 * n + 1));
            (apps, actions).prop_map(move |(appliances, raw)| {
                let mut raw = if appliances.is_empty() {
                    Vec::new()
                } else {
                    raw
                };
                raw.sort_by(|a, b| a.0.total_cmp(&b.0));
                let actions = raw
                    .into_iter()
                    .map(|(t, i, v)| {
                        let cycler = appliances[i].is_cycler();
                        let verb = match (v, cycler) {
                            (0, _) => ActionVerb::On,
                            (1, _) => ActionVerb::Off,
                            (2, true) => ActionVerb::DoorOpen,
                            (3, true) => ActionVerb::DoorClose,
                            (_, false) => ActionVerb::On,
                            _ => unreachable!(),
                        };
                        ScenarioAction::new(
                            (t * 10.0).round() / 10.0,
                            appliances[i].id.clone(),
                            verb,
                        )
                    })
                    .collect();
                Scenario {
                    name: "random".into(),
                    appliances,
                    actions,
                    duration_s: duration.round(),
                    sample_rate_hz: rate,
                    baseline_w: baseline,
                    noise_sigma_w: noise,
                    seed,
                    power_factor: 0.95,
                    voltage_v: 230.0,
                }
            })
        })
}

/// Zero-noise aggregate equals baseline plus the traces, and every trace is
/// positive exactly inside its truth intervals.
pub fn prop_additivity(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&arb_scenario(0.0), |sc| {
        let sim = simulate(&sc).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(sim.aggregate.len(), sc.sample_count());
        for k in 0..sim.aggregate.len() {
            let sum = sim
                .truth
                .traces
                .iter()
                .fold(sc.baseline_w, |acc, t| acc + t.watts[k]);
            prop_assert_eq!(sim.aggregate.watts[k], sum);
        }
        for trace in &sim.truth.traces {
            let mut on = false;
            let mut events = sim.truth.events_for(&trace.id).peekable();
            for (k, &t) in sim.aggregate.t_ms.iter().enumerate() {
                while let Some(e) = events.next_if(|e| e.t_ms <= t) {
                    on = e.verb == Switch::On;
                }
                prop_assert_eq!(trace.watts[k] > 0.0, on, "{} at {} ms", trace.id, t);
            }
        }
        Ok(())
    }))
}

pub fn prop_determinism(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(&arb_scenario(5.0), |sc| {
        let a = simulate(&sc).unwrap();
        let b = simulate(&sc).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    }))
}

fn arb_store_entries() -> impl Strategy<Value = Vec<StoreEntry>> {
    let value = prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        any::<f32>()
            .prop_filter("finite", |x| x.is_finite())
            .prop_map(f64::from)
    ];
    let sample = (
        value.clone(),
        value.clone(),
        value.clone(),
        value.clone(),
        value,
    );
    proptest::collection::vec(
        (
            1i64..5000,
            prop_oneof![9 => Just(false), 1 => Just(true)],
            1i64..20_000,
            sample,
        ),
        0..200,
    )
    .prop_map(|rows| {
        let mut t = -1000;
        let mut out = Vec::new();
        for (step, gap, gap_len, (p, q, v, i, e)) in rows {
            t += step;
            if gap {
                out.push(StoreEntry::Gap {
                    start_ms: t,
                    end_ms: t + gap_len,
                });
                t += gap_len;
            } else {
                out.push(StoreEntry::Sample(PowerSample {
                    t_ms: t,
                    active_w: p,
                    reactive_var: q,
                    voltage_v: v,
                    current_a: i,
                    energy_wh: e,
                }));
            }
        }
        out
    })
}

pub fn prop_store_identity(cases: u32) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("store.csv");
    finish(runner(cases).run(
        &(arb_store_entries(), "[a-z_]{1,8}", "[ -~]{0,20}"),
        |(entries, key, value)| {
            let meta = StoreMeta::new().with(key.clone(), value.trim());
            let mut w = StoreWriter::create(&path, &meta).unwrap();
            for e in &entries {
                match *e {
                    StoreEntry::Sample(ref s) => w.append_sample(s).unwrap(),
                    StoreEntry::Gap { start_ms, end_ms } => w.append_gap(start_ms, end_ms).unwrap(),
                }
            }
            drop(w);
            let back = StoredSeries::open(&path).unwrap();
            prop_assert_eq!(&back.entries, &entries);
            prop_assert_eq!(back.meta.get(&key), Some(value.trim()));
            prop_assert_eq!(back.torn_tail_bytes, 0);
            Ok(())
        },
    ))
}

fn arb_pdu() -> impl Strategy<Value = Pdu> {
    let function = prop_oneof![
        Just(ReadFunction::HoldingRegisters),
        Just(ReadFunction::InputRegisters)
    ];
    prop_oneof![
        (function.clone(), any::<u16>(), 1u16..=125).prop_map(
            |(function, start_address, quantity)| Pdu::ReadRequest {
                function,
                start_address,
                quantity
            }
        ),
        (function, proptest::collection::vec(any::<u16>(), 1..=125)).prop_map(
            |(function, registers)| Pdu::ReadResponse {
                function,
                registers
            }
        ),
        (
            proptest::sample::select(vec![1u8, 2, 3, 4, 5, 6, 0x0F, 0x10, 0x17]),
            1u8..=4
        )
            .prop_map(|(function, code)| Pdu::Exception {
                function,
                code: ExceptionCode(code)
            }),
    ]
}

pub fn prop_modbus_roundtrip(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(
        &(any::<u16>(), any::<u8>(), arb_pdu()),
        |(txid, unit, pdu)| {
            let header = MbapHeader::new(txid, unit);
            let bytes = encode_frame(&header, &pdu).unwrap();
            let (h, p) = decode_frame(&bytes).unwrap();
            prop_assert_eq!(h.transaction_id, txid);
            prop_assert_eq!(h.unit_id, unit);
            prop_assert_eq!(h.length as usize, bytes.len() - 6);
            prop_assert_eq!(p, pdu);
            Ok(())
        },
    ))
}

pub fn prop_register_roundtrip(cases: u32) -> Result<(), String> {
    let field = || prop_oneof![-1e30..1e30f64, -1e4..1e4f64];
    let strat = (
        0i64..=u32::MAX as i64,
        field(),
        field(),
        field(),
        field(),
        field(),
        0u16..12,
        1u16..=12,
    );
    finish(runner(cases).run(&strat, |(t, p, q, v, i, e, start, len)| {
        let map = RegisterMap::standard();
        let sample = PowerSample {
            t_ms: t,
            active_w: p,
            reactive_var: q,
            voltage_v: v,
            current_a: i,
            energy_wh: e,
        };
        let image = encode_registers(&sample, &map);
        let (s0, n) = map.full_block();
        let back = decode_registers(s0, &image.read(s0, n).unwrap(), &map).unwrap();
        let r = |x: f64| x as f32 as f64;
        prop_assert_eq!(
            back,
            PowerSample {
                t_ms: t,
                active_w: r(p),
                reactive_var: r(q),
                voltage_v: r(v),
                current_a: r(i),
                energy_wh: r(e)
            }
        );
        // Partial reads succeed exactly when they stay inside the block.
        let partial = image.read(start, len);
        prop_assert_eq!(partial.is_ok(), start + len <= n);
        Ok(())
    }))
}

fn fridge(thermostat: ThermostatParams) -> ApplianceModel {
    ApplianceModel {
        id: "fridge".into(),
        steady_power_w: 120.0,
        kind: LoadKind::SpikyCycler {
            spike_peak_w: 600.0,
            spike_duration_s: 2.0,
            thermostat,
        },
    }
}

/// Fridge-only scenario lasting `cycles` closed-door duty cycles.
pub fn fridge_scenario(
    thermostat: ThermostatParams,
    cycles: f64,
    noise: f64,
    seed: u64,
) -> Scenario {
    let span = thermostat.temp_high_c - thermostat.temp_low_c;
    let period = span / thermostat.cool_rate_c_per_s + span / thermostat.warm_rate_c_per_s;
    Scenario {
        name: "fridge".into(),
        appliances: vec![fridge(thermostat)],
        actions: Vec::new(),
        duration_s: (cycles * period + 30.0).ceil(),
        sample_rate_hz: 1.0,
        baseline_w: 150.0,
        noise_sigma_w: noise,
        seed,
        power_factor: 0.95,
        voltage_v: 230.0,
    }
}

/// Thermostats whose ON and OFF phases both last 30–600 s and that start
/// idle, so every detected ON period is a full one.
pub fn arb_fridge_thermostat() -> impl Strategy<Value = ThermostatParams> {
    (
        0.0..4.0f64,
        0.5..4.0f64,
        30.0..600.0f64,
        30.0..600.0f64,
        2.0..6.0f64,
        0.0..1.0f64,
    )
        .prop_map(|(low, span, on_s, off_s, mult, frac)| ThermostatParams {
            temp_low_c: low,
            temp_high_c: low + span,
            cool_rate_c_per_s: span / on_s,
            warm_rate_c_per_s: span / off_s,
            door_open_warm_multiplier: mult,
            initial_temp_c: Some(low + frac * span),
            initially_on: false,
        })
}

pub fn prop_thermostat_periodicity(cases: u32) -> Result<(), String> {
    finish(
        runner(cases).run(&(arb_thermostat(), any::<u64>()), |(mut th, seed)| {
            let span = th.temp_high_c - th.temp_low_c;
            // Keep runs short enough for many cases while still spanning 4+ cycles.
            th.cool_rate_c_per_s = th.cool_rate_c_per_s.max(span / 600.0);
            th.warm_rate_c_per_s = th.warm_rate_c_per_s.max(span / 600.0);
            let sc = fridge_scenario(th, 5.0, 0.0, seed);
            let sim = simulate(&sc).unwrap();
            let cycles = build_cycles(&sim.truth.events, "fridge");
            let closed: Vec<f64> = cycles
                .iter()
                .filter(|c| !c.in_progress)
                .skip(1)
                .map(|c| c.on_duration_s)
                .collect();
            prop_assert!(closed.len() >= 3, "only {} full cycles", closed.len());
            let (lo, hi) = closed
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), &d| (lo.min(d), hi.max(d)));
            prop_assert!(hi - lo <= 1.0, "ON durations {:?}", closed);
            Ok(())
        }),
    )
}

fn arb_series_and_events() -> impl Strategy<Value = (PowerSeries, Vec<DetectedEvent>, f64)> {
    (1usize..400, 0.0..500.0f64).prop_flat_map(|(n, baseline)| {
        let watts = proptest::collection::vec(0.0..3000.0f64, n);
        let events = proptest::collection::vec(
            (
                0..n,
                prop_oneof![
                    Just("kettle"),
                    Just("fridge"),
                    Just("pc"),
                    Just(UNKNOWN_LABEL)
                ],
                any::<bool>(),
                20.0..2500.0f64,
            ),
            0..20,
        );
        (watts, events).prop_map(move |(watts, raw)| {
            let t_ms: Vec<Millis> = (0..n as i64).map(|i| i * 1000).collect();
            let mut events: Vec<DetectedEvent> = raw
                .into_iter()
                .map(|(i, label, on, mag)| DetectedEvent {
                    t_ms: t_ms[i],
                    label: label.to_string(),
                    verb: if on { Switch::On } else { Switch::Off },
                    delta_w: if on { mag } else { -mag },
                    confidence: 1.0,
                })
                .collect();
            events.sort_by_key(|e| e.t_ms);
            (PowerSeries::new(t_ms, watts), events, baseline)
        })
    })
}

fn check_conservation(
    series: &PowerSeries,
    tracking: &nilmlab::disagg::Tracking,
) -> Result<(), TestCaseError> {
    for k in 0..series.len() {
        let explained: f64 = tracking.curves.values().map(|c| c[k]).sum();
        let gap = series.watts[k] - tracking.baseline_w - explained - tracking.residual[k];
        prop_assert!(
            gap.abs() <= 1e-9 * (1.0 + series.watts[k].abs() + explained),
            "sample {}: {}",
            k,
            gap
        );
    }
    let (per, residual_wh, baseline_wh) = tracking.energy_wh(series);
    let lhs = per.values().sum::<f64>() + residual_wh;
    let rhs = series.energy_wh() - baseline_wh;
    prop_assert!(
        (lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()),
        "energy {} vs {}",
        lhs,
        rhs
    );
    for e in &tracking.events {
        prop_assert_eq!(e.verb == Switch::On, e.delta_w > 0.0);
    }
    Ok(())
}

/// Reconstructed curves plus residual give back the aggregate, both for
/// arbitrary event lists and for the detector on simulated households.
pub fn prop_conservation(cases: u32) -> Result<(), String> {
    finish(
        runner(cases).run(&arb_series_and_events(), |(series, events, baseline)| {
            let tracking = track_states(&events, &series, baseline);
            check_conservation(&series, &tracking)
        }),
    )?;
    let detector = Detector::new(
        SignatureTable::new(vec![
            Signature::new("a0", 1000.0),
            Signature::new("a1", 300.0),
            Signature::new("a2", 120.0).with_spike(),
        ])
        .unwrap(),
    );
    finish(runner(cases).run(&arb_scenario(5.0), |sc| {
        let sim = simulate(&sc).unwrap();
        let detection = detector.run(&sim.aggregate);
        check_conservation(&sim.aggregate, &detection.tracking)
    }))
}

/// Runs the detector on a fridge-only simulation and returns the watchdog
/// verdict on the detected fridge events.
pub fn fridge_watch(sc: &Scenario) -> (Vec<DetectedEvent>, Vec<Anomaly>) {
    let sim = simulate(sc).unwrap();
    let events = Detector::new(fridge_only())
        .run(&sim.aggregate)
        .events()
        .to_vec();
    let anomalies = detect_anomalies(&build_cycles(&events, "fridge"), 3, 2.0).anomalies;
    (events, anomalies)
}

pub fn prop_watchdog_no_false_alarm(cases: u32) -> Result<(), String> {
    finish(runner(cases).run(
        &(arb_fridge_thermostat(), 0.0..=5.0f64, any::<u64>()),
        |(th, noise, seed)| {
            let sc = fridge_scenario(th, 6.0, noise, seed);
            let (events, anomalies) = fridge_watch(&sc);
            prop_assert!(
                anomalies.is_empty(),
                "false alarms {:?} from {} events",
                anomalies,
                events.len()
            );
            Ok(())
        },
    ))
}

/// Opens the door exactly at the fourth observable compressor start and
/// closes it while that ON period is still running, long enough to stretch
/// it to `target` times its normal length. Needs a door multiplier above
/// `target`.
pub fn door_fault_scenario(
    th: ThermostatParams,
    target: f64,
    noise: f64,
    seed: u64,
) -> (Scenario, Millis, Millis) {
    let mut sc = fridge_scenario(th.clone(), 7.0 + target, noise, seed);
    let closed = simulate(&fridge_scenario(th.clone(), 6.0, 0.0, seed)).unwrap();
    // A start within the first few samples has no steady level before it
    // and cannot be detected, so it does not count towards the baseline.
    let fourth_on = closed
        .truth
        .events
        .iter()
        .filter(|e| e.verb == Switch::On && e.t_ms >= 5_000)
        .nth(3)
        .expect("four cycles")
        .t_ms;
    let m = th.door_open_warm_multiplier;
    let t_on = (th.temp_high_c - th.temp_low_c) / th.cool_rate_c_per_s;
    // ON length with the door open for d seconds: t_on + d (1 − 1/m).
    let d = ((target - 1.0) * t_on / (1.0 - 1.0 / m)).ceil();
    let open_s = fourth_on as f64 / 1000.0;
    let close_s = open_s + d;
    sc.actions = vec![
        ScenarioAction::new(open_s, "fridge", ActionVerb::DoorOpen),
        ScenarioAction::new(close_s, "fridge", ActionVerb::DoorClose),
    ];
    (sc, fourth_on, (close_s * 1000.0) as Millis)
}

pub fn prop_watchdog_guaranteed_detection(cases: u32) -> Result<(), String> {
    let strat = (
        arb_fridge_thermostat(),
        2.3..4.0f64,
        0.0..=5.0f64,
        any::<u64>(),
    );
    finish(runner(cases).run(&strat, |(mut th, target, noise, seed)| {
        // The stretched ON period must still be running when the door closes.
        th.door_open_warm_multiplier = th.door_open_warm_multiplier.max(target + 1.5);
        let (sc, open_ms, close_ms) = door_fault_scenario(th, target, noise, seed);
        let (events, anomalies) = fridge_watch(&sc);
        prop_assert_eq!(anomalies.len(), 1, "anomalies {:?}", anomalies);
        let a = &anomalies[0];
        prop_assert_eq!(a.kind, AnomalyKind::ElongatedOn);
        prop_assert!(a.ratio >= 2.0);
        prop_assert!(
            (a.t_start_ms - open_ms).abs() <= 3000 && a.t_end_ms >= close_ms,
            "{:?} vs door [{}, {}]",
            a,
            open_ms,
            close_ms
        );

        // The online watchdog reports the same anomaly once, before the
        // compressor stops.
        let mut wd = Watchdog::new("fridge", 3, 2.0);
        let mut seen: Vec<Anomaly> = Vec::new();
        let mut pending = events.iter().peekable();
        let end_ms = sc.duration_ms();
        let mut t = 0;
        while t < end_ms {
            while let Some(e) = pending.next_if(|e| e.t_ms <= t) {
                wd.observe(e, &mut seen);
            }
            wd.tick(t, &mut seen);
            t += 1000;
        }
        prop_assert_eq!(seen.len(), 1, "online anomalies {:?}", seen);
        prop_assert!(seen[0].t_end_ms < a.t_end_ms);
        Ok(())
    }))
}

/// Median baseline shifts by at most the spread of the healthy cycles when
/// one outlier is injected.
pub fn prop_baseline_robustness(cases: u32) -> Result<(), String> {
    let strat = (
        proptest::collection::vec(100.0..1000.0f64, 3),
        0usize..4,
        0.0..1e5f64,
    );
    finish(runner(cases).run(&strat, |(healthy, at, outlier)| {
        let base = nilmlab::watchdog::median(&healthy).unwrap();
        let spread = healthy.iter().cloned().fold(f64::MIN, f64::max)
            - healthy.iter().cloned().fold(f64::MAX, f64::min);
        let mut with = healthy.clone();
        with.insert(at.min(with.len()), outlier);
        let shifted = nilmlab::watchdog::median(&with).unwrap();
        prop_assert!((shifted - base).abs() <= spread + 1e-9);
        Ok(())
    }))
}

pub type Property = (&'static str, fn(u32) -> Result<(), String>);

pub const PROPERTIES: &[Property] = &[
    ("additivity", prop_additivity),
    ("determinism", prop_determinism),
    ("store write-read identity", prop_store_identity),
    ("modbus frame round-trip", prop_modbus_roundtrip),
    ("register round-trip", prop_register_roundtrip),
    ("thermostat periodicity", prop_thermostat_periodicity),
    ("energy conservation", prop_conservation),
    ("watchdog no false alarm", prop_watchdog_no_false_alarm),
    (
        "watchdog guaranteed detection",
        prop_watchdog_guaranteed_detection,
    ),
    ("median baseline robustness", prop_baseline_robustness),
];
