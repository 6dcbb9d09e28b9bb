//! Control frames: one ASCII character per WebSocket text frame.

use wheelsim_core::Command;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("invalid command frame: {0}")]
    InvalidFrame(String),
}

/// A frame as it arrives off the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireFrame {
    Text(String),
    Binary(Vec<u8>),
}

pub fn encode_command(c: Command) -> String {
    c.symbol().to_string()
}

pub fn decode_text(s: &str) -> Result<Command, FrameError> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(ch), None) => {
            Command::from_symbol(ch).ok_or_else(|| FrameError::InvalidFrame(format!("unknown symbol {ch:?}")))
        }
        _ => Err(FrameError::InvalidFrame(format!("expected one character, got {} bytes", s.len()))),
    }
}

/// Decode raw frame bytes as if they had arrived in a text frame.
pub fn decode_bytes(b: &[u8]) -> Result<Command, FrameError> {
    match std::str::from_utf8(b) {
        Ok(s) => decode_text(s),
        Err(_) => Err(FrameError::InvalidFrame("not UTF-8".into())),
    }
}

pub fn decode_command(frame: &WireFrame) -> Result<Command, FrameError> {
    match frame {
        WireFrame::Text(s) => decode_text(s),
        WireFrame::Binary(_) => Err(FrameError::InvalidFrame("binary frame".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bijection() {
        for c in Command::ALL {
            let f = encode_command(c);
            assert_eq!(f.len(), 1);
            assert_eq!(decode_command(&WireFrame::Text(f)).unwrap(), c);
        }
    }

    #[test]
    fn rejections() {
        assert!(decode_text("X").is_err());
        assert!(decode_text("").is_err());
        assert!(decode_text("FF").is_err());
        assert!(decode_text("f").is_err());
        assert!(decode_command(&WireFrame::Binary(b"F".to_vec())).is_err());
    }

    #[test]
    fn exhaustive_single_bytes() {
        let accepted: Vec<u8> = (0u8..=255).filter(|b| decode_bytes(&[*b]).is_ok()).collect();
        assert_eq!(accepted, b"BFLRS".to_vec());
    }
}
