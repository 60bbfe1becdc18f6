//! Modbus TCP subset spoken by the virtual meter: MBAP framing, read
//! holding/input registers (0x03/0x04), exception responses, and the
//! register map that lays a [`PowerSample`](crate::PowerSample) out as
//! 16-bit words.

mod frame;
mod registers;
pub mod transport;

pub use frame::{
    decode_frame, encode_frame, DecodeError, EncodeError, ExceptionCode, MbapHeader, Pdu,
    ReadFunction, MAX_READ_QUANTITY, MBAP_LEN, PROTOCOL_ID,
};
pub use registers::{
    decode_registers, encode_registers, Encoding, Quantity, RegisterEntry, RegisterError,
    RegisterImage, RegisterMap,
};
