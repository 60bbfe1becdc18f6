use std::fmt;
use thiserror::Error;

pub const PROTOCOL_ID: u16 = 0;
pub const MBAP_LEN: usize = 7;
pub const MAX_READ_QUANTITY: u16 = 125;

/// Function codes whose exception responses (`fc | 0x80`) the decoder
/// recognizes. Anything else in the function byte is an unknown function.
const KNOWN_FUNCTIONS: [u8; 9] = [0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x0F, 0x10, 0x17];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbapHeader {
    pub transaction_id: u16,
    pub protocol_id: u16,
    /// Byte count of unit id + PDU. Recomputed on encode.
    pub length: u16,
    pub unit_id: u8,
}

impl MbapHeader {
    pub fn new(transaction_id: u16, unit_id: u8) -> Self {
        Self {
            transaction_id,
            protocol_id: PROTOCOL_ID,
            length: 0,
            unit_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReadFunction {
    HoldingRegisters,
    InputRegisters,
}

impl ReadFunction {
    pub fn code(self) -> u8 {
        match self {
            ReadFunction::HoldingRegisters => 0x03,
            ReadFunction::InputRegisters => 0x04,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x03 => Some(ReadFunction::HoldingRegisters),
            0x04 => Some(ReadFunction::InputRegisters),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExceptionCode(pub u8);

impl ExceptionCode {
    pub const ILLEGAL_FUNCTION: Self = Self(0x01);
    pub const ILLEGAL_DATA_ADDRESS: Self = Self(0x02);
    pub const ILLEGAL_DATA_VALUE: Self = Self(0x03);
    pub const SERVER_DEVICE_FAILURE: Self = Self(0x04);
}

impl fmt::Display for ExceptionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match *self {
            Self::ILLEGAL_FUNCTION => "illegal function",
            Self::ILLEGAL_DATA_ADDRESS => "illegal data address",
            Self::ILLEGAL_DATA_VALUE => "illegal data value",
            Self::SERVER_DEVICE_FAILURE => "server device failure",
            _ => "exception",
        };
        write!(f, "{name} (0x{:02X})", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pdu {
    ReadRequest {
        function: ReadFunction,
        start_address: u16,
        quantity: u16,
    },
    ReadResponse {
        function: ReadFunction,
        registers: Vec<u16>,
    },
    /// `function` is the original (request) function code without the 0x80 bit.
    Exception { function: u8, code: ExceptionCode },
}

impl Pdu {
    pub fn read_holding(start_address: u16, quantity: u16) -> Self {
        Pdu::ReadRequest {
            function: ReadFunction::HoldingRegisters,
            start_address,
            quantity,
        }
    }

    pub fn function_byte(&self) -> u8 {
        match self {
            Pdu::ReadRequest { function, .. } | Pdu::ReadResponse { function, .. } => {
                function.code()
            }
            Pdu::Exception { function, .. } => function | 0x80,
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            Pdu::ReadRequest { .. } => 5,
            Pdu::ReadResponse { registers, .. } => 2 + 2 * registers.len(),
            Pdu::Exception { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("read quantity {0} outside 1..=125")]
    QuantityOutOfRange(usize),
    #[error("exception function code 0x{0:02X} must be in 0x01..=0x7F")]
    BadExceptionFunction(u8),
}

/// Every way a byte sequence can fail to be a frame. Decoding never panics.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("short frame: {len} bytes")]
    ShortFrame { len: usize },
    #[error("protocol id {0} is not Modbus (0)")]
    ProtocolId(u16),
    #[error("MBAP length {declared} but {actual} bytes follow")]
    LengthMismatch { declared: u16, actual: usize },
    #[error("unknown function code 0x{0:02X}")]
    UnknownFunction(u8),
    #[error("read quantity {0} outside 1..=125")]
    InvalidQuantity(u16),
    #[error("byte count {declared} does not match {actual} data bytes")]
    ByteCountMismatch { declared: u8, actual: usize },
    #[error("malformed PDU for function 0x{function:02X} ({len} bytes)")]
    MalformedPdu { function: u8, len: usize },
}

pub fn encode_frame(header: &MbapHeader, pdu: &Pdu) -> Result<Vec<u8>, EncodeError> {
    match pdu {
        Pdu::ReadRequest { quantity, .. } => {
            if !(1..=MAX_READ_QUANTITY).contains(quantity) {
                return Err(EncodeError::QuantityOutOfRange(*quantity as usize));
            }
        }
        Pdu::ReadResponse { registers, .. } => {
            if registers.is_empty() || registers.len() > MAX_READ_QUANTITY as usize {
                return Err(EncodeError::QuantityOutOfRange(registers.len()));
            }
        }
        Pdu::Exception { function, .. } => {
            if *function == 0 || *function >= 0x80 {
                return Err(EncodeError::BadExceptionFunction(*function));
            }
        }
    }
    let pdu_len = pdu.encoded_len();
    let mut out = Vec::with_capacity(MBAP_LEN + pdu_len);
    out.extend_from_slice(&header.transaction_id.to_be_bytes());
    out.extend_from_slice(&PROTOCOL_ID.to_be_bytes());
    out.extend_from_slice(&((pdu_len + 1) as u16).to_be_bytes());
    out.push(header.unit_id);
    out.push(pdu.function_byte());
    match pdu {
        Pdu::ReadRequest {
            start_address,
            quantity,
            ..
        } => {
            out.extend_from_slice(&start_address.to_be_bytes());
            out.extend_from_slice(&quantity.to_be_bytes());
        }
        Pdu::ReadResponse { registers, .. } => {
            out.push((registers.len() * 2) as u8);
            for r in registers {
                out.extend_from_slice(&r.to_be_bytes());
            }
        }
        Pdu::Exception { code, .. } => out.push(code.0),
    }
    Ok(out)
}

/// Decodes one complete frame.
///
/// Requests and responses share function codes; they are told apart by PDU
/// length, which is odd (5) for a read request and even for a response.
pub fn decode_frame(bytes: &[u8]) -> Result<(MbapHeader, Pdu), DecodeError> {
    if bytes.len() < MBAP_LEN + 1 {
        return Err(DecodeError::ShortFrame { len: bytes.len() });
    }
    let transaction_id = u16::from_be_bytes([bytes[0], bytes[1]]);
    let protocol_id = u16::from_be_bytes([bytes[2], bytes[3]]);
    let length = u16::from_be_bytes([bytes[4], bytes[5]]);
    let unit_id = bytes[6];
    if protocol_id != PROTOCOL_ID {
        return Err(DecodeError::ProtocolId(protocol_id));
    }
    let actual = bytes.len() - 6;
    if length as usize != actual {
        return Err(DecodeError::LengthMismatch {
            declared: length,
            actual,
        });
    }
    let header = MbapHeader {
        transaction_id,
        protocol_id,
        length,
        unit_id,
    };
    let pdu = &bytes[MBAP_LEN..];
    let fc = pdu[0];

    if let Some(function) = ReadFunction::from_code(fc) {
        if pdu.len() == 5 {
            let start_address = u16::from_be_bytes([pdu[1], pdu[2]]);
            let quantity = u16::from_be_bytes([pdu[3], pdu[4]]);
            if !(1..=MAX_READ_QUANTITY).contains(&quantity) {
                return Err(DecodeError::InvalidQuantity(quantity));
            }
            return Ok((
                header,
                Pdu::ReadRequest {
                    function,
                    start_address,
                    quantity,
                },
            ));
        }
        if pdu.len() < 2 {
            return Err(DecodeError::MalformedPdu {
                function: fc,
                len: pdu.len(),
            });
        }
        let declared = pdu[1];
        let data = &pdu[2..];
        if declared as usize != data.len() || !declared.is_multiple_of(2) || declared == 0 {
            return Err(DecodeError::ByteCountMismatch {
                declared,
                actual: data.len(),
            });
        }
        if declared as u16 > 2 * MAX_READ_QUANTITY {
            return Err(DecodeError::InvalidQuantity(declared as u16 / 2));
        }
        let registers = data
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        return Ok((
            header,
            Pdu::ReadResponse {
                function,
                registers,
            },
        ));
    }

    if fc & 0x80 != 0 && KNOWN_FUNCTIONS.contains(&(fc & 0x7F)) {
        if pdu.len() != 2 {
            return Err(DecodeError::MalformedPdu {
                function: fc,
                len: pdu.len(),
            });
        }
        return Ok((
            header,
            Pdu::Exception {
                function: fc & 0x7F,
                code: ExceptionCode(pdu[1]),
            },
        ));
    }
    Err(DecodeError::UnknownFunction(fc))
}
