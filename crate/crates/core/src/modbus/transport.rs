//! Reading whole frames off a byte stream.

use super::frame::MBAP_LEN;
use tokio::io::{AsyncRead, AsyncReadExt};

/// Largest legal MBAP length field: unit id + 253-byte PDU.
pub const MAX_MBAP_LENGTH: u16 = 254;

#[derive(Debug, thiserror::Error)]
pub enum FrameReadError {
    #[error("connection closed")]
    Closed,
    #[error("MBAP length {0} outside 2..=254")]
    BadLength(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one MBAP-delimited frame. A clean EOF before the first byte is
/// reported as [`FrameReadError::Closed`].
pub async fn read_frame<R: AsyncRead + Unpin>(reader: &mut R) -> Result<Vec<u8>, FrameReadError> {
    let mut header = [0u8; MBAP_LEN];
    match reader.read_exact(&mut header[..1]).await {
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return Err(FrameReadError::Closed)
        }
        Err(e) => return Err(e.into()),
    }
    reader.read_exact(&mut header[1..]).await?;
    let length = u16::from_be_bytes([header[4], header[5]]);
    if !(2..=MAX_MBAP_LENGTH).contains(&length) {
        return Err(FrameReadError::BadLength(length));
    }
    let mut frame = Vec::with_capacity(6 + length as usize);
    frame.extend_from_slice(&header);
    frame.resize(6 + length as usize, 0);
    reader.read_exact(&mut frame[MBAP_LEN..]).await?;
    Ok(frame)
}
