use crate::series::PowerSample;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    ActivePower,
    ReactivePower,
    Voltage,
    Current,
    Energy,
    /// Meter-simulated time of the snapshot in milliseconds.
    SimTime,
}

/// Two-register encodings, high word first on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    F32,
    U32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterEntry {
    pub address: u16,
    pub quantity: Quantity,
    pub encoding: Encoding,
}

impl RegisterEntry {
    pub const WIDTH: u16 = 2;

    fn span(&self) -> std::ops::Range<u32> {
        self.address as u32..self.address as u32 + Self::WIDTH as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegisterError {
    #[error("register 0x{0:04X} is not mapped")]
    IllegalAddress(u16),
    #[error("register entries at 0x{0:04X} and 0x{1:04X} overlap")]
    Overlap(u16, u16),
    #[error("{0:?} appears more than once in the map")]
    DuplicateQuantity(Quantity),
    #[error("map does not provide {0:?}")]
    Missing(Quantity),
}

/// Address layout of the meter. Every entry spans exactly two registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterMap {
    entries: Vec<RegisterEntry>,
}

impl Default for RegisterMap {
    fn default() -> Self {
        Self::standard()
    }
}

impl RegisterMap {
    /// Default layout: five binary32 electrical quantities at 0x0000..0x0009,
    /// then the snapshot time as u32 milliseconds at 0x000A.
    pub fn standard() -> Self {
        use Encoding::*;
        use Quantity::*;
        let entry = |address, quantity, encoding| RegisterEntry {
            address,
            quantity,
            encoding,
        };
        Self::new(vec![
            entry(0x0000, ActivePower, F32),
            entry(0x0002, ReactivePower, F32),
            entry(0x0004, Voltage, F32),
            entry(0x0006, Current, F32),
            entry(0x0008, Energy, F32),
            entry(0x000A, SimTime, U32),
        ])
        .expect("standard map is valid")
    }

    pub fn new(mut entries: Vec<RegisterEntry>) -> Result<Self, RegisterError> {
        entries.sort_by_key(|e| e.address);
        for pair in entries.windows(2) {
            if pair[0].span().end > pair[1].address as u32 {
                return Err(RegisterError::Overlap(pair[0].address, pair[1].address));
            }
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.quantity == e.quantity) {
                return Err(RegisterError::DuplicateQuantity(e.quantity));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RegisterEntry] {
        &self.entries
    }

    pub fn entry(&self, quantity: Quantity) -> Option<&RegisterEntry> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }

    /// `(start, quantity)` of the smallest read covering the whole map.
    pub fn full_block(&self) -> (u16, u16) {
        let start = self.entries.first().map_or(0, |e| e.address);
        let end = self.entries.last().map_or(0, |e| e.span().end);
        (start, (end - start as u32) as u16)
    }
}

/// Register snapshot produced from one sample.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegisterImage {
    words: BTreeMap<u16, u16>,
}

impl RegisterImage {
    /// Reads `quantity` registers from `start`; every address must be mapped.
    pub fn read(&self, start: u16, quantity: u16) -> Result<Vec<u16>, RegisterError> {
        (0..quantity as u32)
            .map(|i| {
                let addr = start as u32 + i;
                let addr16 =
                    u16::try_from(addr).map_err(|_| RegisterError::IllegalAddress(u16::MAX))?;
                self.words
                    .get(&addr16)
                    .copied()
                    .ok_or(RegisterError::IllegalAddress(addr16))
            })
            .collect()
    }
}

fn split(bits: u32) -> [u16; 2] {
    [(bits >> 16) as u16, bits as u16]
}

fn join(hi: u16, lo: u16) -> u32 {
    ((hi as u32) << 16) | lo as u32
}

fn field(sample: &PowerSample, q: Quantity) -> f64 {
    match q {
        Quantity::ActivePower => sample.active_w,
        Quantity::ReactivePower => sample.reactive_var,
        Quantity::Voltage => sample.voltage_v,
        Quantity::Current => sample.current_a,
        Quantity::Energy => sample.energy_wh,
        Quantity::SimTime => sample.t_ms as f64,
    }
}

pub fn encode_registers(sample: &PowerSample, map: &RegisterMap) -> RegisterImage {
    let mut words = BTreeMap::new();
    for e in map.entries() {
        let bits = match e.encoding {
            Encoding::F32 => (field(sample, e.quantity) as f32).to_bits(),
            Encoding::U32 => field(sample, e.quantity).clamp(0.0, u32::MAX as f64) as u32,
        };
        let [hi, lo] = split(bits);
        words.insert(e.address, hi);
        words.insert(e.address + 1, lo);
    }
    RegisterImage { words }
}

/// Decodes a block read starting at `start`. The block must cover every
/// entry of the map.
pub fn decode_registers(
    start: u16,
    registers: &[u16],
    map: &RegisterMap,
) -> Result<PowerSample, RegisterError> {
    let mut sample = PowerSample {
        t_ms: 0,
        active_w: 0.0,
        reactive_var: 0.0,
        voltage_v: 0.0,
        current_a: 0.0,
        energy_wh: 0.0,
    };
    for e in map.entries() {
        let offset = (e.address as usize)
            .checked_sub(start as usize)
            .ok_or(RegisterError::Missing(e.quantity))?;
        let (Some(&hi), Some(&lo)) = (registers.get(offset), registers.get(offset + 1)) else {
            return Err(RegisterError::Missing(e.quantity));
        };
        let bits = join(hi, lo);
        let value = match e.encoding {
            Encoding::F32 => f32::from_bits(bits) as f64,
            Encoding::U32 => bits as f64,
        };
        match e.quantity {
            Quantity::ActivePower => sample.active_w = value,
            Quantity::ReactivePower => sample.reactive_var = value,
            Quantity::Voltage => sample.voltage_v = value,
            Quantity::Current => sample.current_a = value,
            Quantity::Energy => sample.energy_wh = value,
            Quantity::SimTime => sample.t_ms = bits as i64,
        }
    }
    Ok(sample)
}
