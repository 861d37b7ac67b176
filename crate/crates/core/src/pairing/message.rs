use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::mac::StationId;

/// Every protocol frame is padded to the largest 802.11 payload.
pub const FRAME_LEN: usize = 2304;
const HEADER_LEN: usize = 6;

/// One copy `M_i` of a party's key exchange message. Addresses travel in
/// the MAC header; the payload carries `i | m | len | g^x | padding`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub index: u16,
    pub total: u16,
    pub dh_public: BigUint,
    pub sender: StationId,
    pub dest: StationId,
}

pub fn build_message(
    index: u16,
    total: u16,
    dh_public: BigUint,
    sender: StationId,
    dest: StationId,
) -> Result<ProtocolMessage> {
    if index == 0 || index > total {
        return Err(Error::InvalidArgument(format!(
            "message index {index} outside 1..={total}"
        )));
    }
    let msg = ProtocolMessage {
        index,
        total,
        dh_public,
        sender,
        dest,
    };
    msg.to_bytes()?;
    Ok(msg)
}

impl ProtocolMessage {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let public = self.dh_public.to_bytes_be();
        if public.len() > FRAME_LEN - HEADER_LEN {
            return Err(Error::InvalidArgument(format!(
                "public value of {} bytes does not fit a {FRAME_LEN}-byte frame",
                public.len()
            )));
        }
        let mut out = Vec::with_capacity(FRAME_LEN);
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(&self.total.to_be_bytes());
        out.extend_from_slice(&(public.len() as u16).to_be_bytes());
        out.extend_from_slice(&public);
        out.resize(FRAME_LEN, 0);
        Ok(out)
    }

    pub fn parse(bytes: &[u8], sender: StationId, dest: StationId) -> Result<Self> {
        if bytes.len() != FRAME_LEN {
            return Err(Error::Malformed(format!(
                "protocol frame is {} bytes, expected {FRAME_LEN}",
                bytes.len()
            )));
        }
        let word = |at: usize| u16::from_be_bytes([bytes[at], bytes[at + 1]]);
        let (index, total, len) = (word(0), word(2), word(4) as usize);
        if index == 0 || index > total {
            return Err(Error::Malformed(format!(
                "index {index} outside 1..={total}"
            )));
        }
        if len > FRAME_LEN - HEADER_LEN {
            return Err(Error::Malformed(format!(
                "public value length {len} too large"
            )));
        }
        if bytes[HEADER_LEN + len..].iter().any(|&b| b != 0) {
            return Err(Error::Malformed("nonzero padding".into()));
        }
        Ok(ProtocolMessage {
            index,
            total,
            dh_public: BigUint::from_bytes_be(&bytes[HEADER_LEN..HEADER_LEN + len]),
            sender,
            dest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let m = build_message(1, 7, BigUint::from(0x0102u32), StationId(1), StationId(2)).unwrap();
        let b = m.to_bytes().unwrap();
        assert_eq!(b.len(), 2304);
        assert_eq!(&b[..8], &[0, 1, 0, 7, 0, 2, 1, 2]);
        assert!(b[8..].iter().all(|&x| x == 0));
        assert_eq!(
            ProtocolMessage::parse(&b, StationId(1), StationId(2)).unwrap(),
            m
        );
    }

    #[test]
    fn single_shot_frame_is_full_size() {
        let m = build_message(1, 1, BigUint::from(5u32), StationId(0), StationId(1)).unwrap();
        assert_eq!(m.to_bytes().unwrap().len(), FRAME_LEN);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_message(0, 3, BigUint::from(1u32), StationId(0), StationId(1)).is_err());
        assert!(build_message(4, 3, BigUint::from(1u32), StationId(0), StationId(1)).is_err());
        let huge = BigUint::from(1u32) << (8 * 2298);
        assert!(build_message(1, 1, huge, StationId(0), StationId(1)).is_err());
        assert!(ProtocolMessage::parse(&[0u8; 10], StationId(0), StationId(1)).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(total in 1u16..64, pick in 0u16..64, bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
            let index = pick % total + 1;
            let public = BigUint::from_bytes_be(&bytes);
            let m = build_message(index, total, public, StationId(3), StationId(4)).unwrap();
            let b = m.to_bytes().unwrap();
            prop_assert_eq!(b.len(), FRAME_LEN);
            prop_assert_eq!(ProtocolMessage::parse(&b, StationId(3), StationId(4)).unwrap(), m);
        }
    }
}
