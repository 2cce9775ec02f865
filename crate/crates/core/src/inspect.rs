//! Decoding of standalone wire messages by their leading tag byte.

use crate::derived::ValidatedMsg;
use crate::msc::MscMsg;
use crate::pc::PcMsg;
use crate::spc::SpcMsg;
use crate::wire::{Decode, DecodeError, DecodeErrorKind, Reader};

/// A decoded message of any protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMsg {
    Pc(PcMsg),
    Spc(SpcMsg),
    Msc(MscMsg),
    Validated(ValidatedMsg),
}

impl WireMsg {
    /// Protocol family name.
    pub fn family(&self) -> &'static str {
        match self {
            WireMsg::Pc(_) => "pc",
            WireMsg::Spc(_) => "spc",
            WireMsg::Msc(_) => "msc",
            WireMsg::Validated(_) => "validated",
        }
    }
}

/// Decodes one message, choosing the family from the first byte.
pub fn decode_message(bytes: &[u8]) -> Result<WireMsg, DecodeError> {
    let Some(&tag) = bytes.first() else {
        return Err(Reader::new(bytes).err(DecodeErrorKind::Truncated));
    };
    match tag {
        0x10..=0x16 => PcMsg::from_bytes(bytes).map(WireMsg::Pc),
        0x20..=0x25 => SpcMsg::from_bytes(bytes).map(WireMsg::Spc),
        0x30..=0x33 => MscMsg::from_bytes(bytes).map(WireMsg::Msc),
        0x40..=0x41 => ValidatedMsg::from_bytes(bytes).map(WireMsg::Validated),
        t => Err(Reader::new(bytes).err(DecodeErrorKind::BadTag(t))),
    }
}

/// Classic 16-bytes-per-line hex dump with offsets.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::new();
    for (i, chunk) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = chunk.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&format!("{:08x}  {}\n", i * 16, hex.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_unknown_tags_fail() {
        assert_eq!(decode_message(&[]).unwrap_err().kind, DecodeErrorKind::Truncated);
        assert_eq!(decode_message(&[0x99]).unwrap_err().kind, DecodeErrorKind::BadTag(0x99));
    }

    #[test]
    fn dump_wraps_at_sixteen() {
        let d = hex_dump(&[0xab; 17]);
        assert_eq!(d.lines().count(), 2);
        assert!(d.starts_with("00000000  ab ab"));
        assert!(d.lines().nth(1).unwrap().starts_with("00000010  ab"));
    }
}
