//! Binary payload encoding.
//!
//! All integers and floats are little-endian. Building blocks:
//!
//! | item        | layout                                                     |
//! |-------------|------------------------------------------------------------|
//! | client id   | `u16` length, ASCII bytes                                  |
//! | f64 vector  | tag `0x00`, `u32` length `d`, `d × f64`                    |
//! | quantized   | tag `0x01`, `u32` length `d`, `f64` step, `d` zigzag LEB128 |
//!
//! Payloads by message kind:
//!
//! | kind         | layout                                   | f64 size           |
//! |--------------|------------------------------------------|--------------------|
//! | share        | client id, vector                        | `2+|id| + 5+8d`    |
//! | matrix       | `u32` rows `k`, `u32` cols `d`, `k·d × f64` | `8 + 8kd`       |
//! | reply        | client id, vector                        | `2+|id| + 5+8k`    |
//! | accept-bit   | client id, `u8` (0 or 1)                 | `3+|id|`           |
//! | accepted-set | `u32` count, client ids                  | `4 + Σ(2+|id|)`    |
//! | partial-sum  | vector                                   | `5 + 8d`           |
//!
//! Decoders treat their input as untrusted: lengths are checked against
//! the remaining bytes before allocating, non-finite values and trailing
//! bytes are rejected.

use super::message::MessageKind;
use super::party::ClientId;
use crate::error::{Error, Result};
use crate::sharing::Truncation;
use crate::vector::RealVector;

const TAG_F64: u8 = 0x00;
const TAG_QUANTIZED: u8 = 0x01;

pub const CLIENT_ID_HEADER: usize = 2;
pub const VECTOR_HEADER: usize = 5;
pub const MATRIX_HEADER: usize = 8;
pub const ACCEPTED_SET_HEADER: usize = 4;

/// How share vectors are put on the wire.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum VectorEncoding {
    #[default]
    F64,
    /// Quantize onto the truncation grid and send varint codes.
    Quantized(Truncation),
}

impl VectorEncoding {
    pub fn from_truncation(t: Option<&Truncation>) -> Self {
        match t {
            Some(t) => VectorEncoding::Quantized(t.clone()),
            None => VectorEncoding::F64,
        }
    }
}

/// A decoded payload.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Share { client: ClientId, vector: RealVector },
    Matrix { rows: usize, cols: usize, entries: Vec<f64> },
    Reply { client: ClientId, vector: RealVector },
    AcceptBit { client: ClientId, accept: bool },
    AcceptedSet(Vec<ClientId>),
    PartialSum(RealVector),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Share { .. } => MessageKind::Share,
            Payload::Matrix { .. } => MessageKind::Matrix,
            Payload::Reply { .. } => MessageKind::Reply,
            Payload::AcceptBit { .. } => MessageKind::AcceptBit,
            Payload::AcceptedSet(_) => MessageKind::AcceptedSet,
            Payload::PartialSum(_) => MessageKind::PartialSum,
        }
    }

    pub fn decode(kind: MessageKind, bytes: &[u8]) -> Result<Payload> {
        let mut r = Reader::new(bytes);
        let p = match kind {
            MessageKind::Share => Payload::Share {
                client: r.client_id()?,
                vector: r.vector()?,
            },
            MessageKind::Matrix => {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                let n = rows
                    .checked_mul(cols)
                    .filter(|&n| n >= 1 && n <= r.remaining() / 8)
                    .ok_or_else(|| Error::Decode(format!("matrix shape {rows}x{cols} does not fit payload")))?;
                let entries = r.finite_f64s(n)?;
                Payload::Matrix { rows, cols, entries }
            }
            MessageKind::Reply => Payload::Reply {
                client: r.client_id()?,
                vector: r.vector()?,
            },
            MessageKind::AcceptBit => {
                let client = r.client_id()?;
                let accept = match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(Error::Decode(format!("accept bit must be 0 or 1, got {b}"))),
                };
                Payload::AcceptBit { client, accept }
            }
            MessageKind::AcceptedSet => {
                let n = r.u32()? as usize;
                if n > r.remaining() / (CLIENT_ID_HEADER + 1) {
                    return Err(Error::Decode(format!("accepted set of {n} ids does not fit payload")));
                }
                let ids = (0..n).map(|_| r.client_id()).collect::<Result<Vec<_>>>()?;
                Payload::AcceptedSet(ids)
            }
            MessageKind::PartialSum => Payload::PartialSum(r.vector()?),
        };
        r.finish()?;
        Ok(p)
    }
}

pub fn encode_client_id(out: &mut Vec<u8>, id: &ClientId) {
    let b = id.as_str().as_bytes();
    out.extend_from_slice(&(b.len() as u16).to_le_bytes());
    out.extend_from_slice(b);
}

/// Encodes raw values. Non-finite values are written as-is; receivers
/// reject them.
pub fn encode_vector(out: &mut Vec<u8>, values: &[f64], enc: &VectorEncoding) {
    match enc {
        VectorEncoding::F64 => {
            out.push(TAG_F64);
            out.extend_from_slice(&(values.len() as u32).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        VectorEncoding::Quantized(t) => {
            out.push(TAG_QUANTIZED);
            out.extend_from_slice(&(values.len() as u32).to_le_bytes());
            out.extend_from_slice(&t.step.to_le_bytes());
            for &v in values {
                write_varint(out, zigzag(t.code(v)));
            }
        }
    }
}

pub fn encode_share(id: &ClientId, values: &[f64], enc: &VectorEncoding) -> Vec<u8> {
    let mut out = Vec::with_capacity(CLIENT_ID_HEADER + id.as_str().len() + VECTOR_HEADER + 8 * values.len());
    encode_client_id(&mut out, id);
    encode_vector(&mut out, values, enc);
    out
}

pub fn encode_matrix(rows: usize, cols: usize, entries: &[f64]) -> Vec<u8> {
    debug_assert_eq!(rows * cols, entries.len());
    let mut out = Vec::with_capacity(MATRIX_HEADER + 8 * entries.len());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in entries {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_reply(id: &ClientId, y: &RealVector) -> Vec<u8> {
    encode_share(id, y.as_slice(), &VectorEncoding::F64)
}

pub fn encode_accept_bit(id: &ClientId, accept: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(CLIENT_ID_HEADER + id.as_str().len() + 1);
    encode_client_id(&mut out, id);
    out.push(accept as u8);
    out
}

pub fn encode_accepted_set(ids: &[ClientId]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
    for id in ids {
        encode_client_id(&mut out, id);
    }
    out
}

pub fn encode_partial_sum(s: &RealVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(VECTOR_HEADER + 8 * s.dim());
    encode_vector(&mut out, s.as_slice(), &VectorEncoding::F64);
    out
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Encoded size of one zigzag varint code.
pub fn varint_len(code: i64) -> usize {
    let mut v = zigzag(code);
    let mut n = 1;
    while v >= 0x80 {
        v >>= 7;
        n += 1;
    }
    n
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Decode(format!(
                "truncated payload: need {n} bytes at offset {}, have {}",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finite_f64(&mut self) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8)?.try_into().unwrap());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Decode("non-finite value".into()))
        }
    }

    fn finite_f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Decode("length overflow".into()))?)?;
        let v: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Decode("non-finite value".into()))
        }
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            if shift == 63 && b > 1 {
                return Err(Error::Decode("varint overflows 64 bits".into()));
            }
            v |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::Decode("varint longer than 10 bytes".into()))
    }

    fn client_id(&mut self) -> Result<ClientId> {
        let n = self.u16()? as usize;
        let b = self.take(n)?;
        let s = std::str::from_utf8(b).map_err(|_| Error::Decode("client id is not UTF-8".into()))?;
        ClientId::parse(s)
    }

    fn vector(&mut self) -> Result<RealVector> {
        let tag = self.u8()?;
        let d = self.u32()? as usize;
        if d == 0 {
            return Err(Error::Decode("empty vector".into()));
        }
        let values = match tag {
            TAG_F64 => {
                if d > self.remaining() / 8 {
                    return Err(Error::Decode(format!("vector of length {d} does not fit payload")));
                }
                self.finite_f64s(d)?
            }
            TAG_QUANTIZED => {
                let step = self.finite_f64()?;
                if step <= 0.0 {
                    return Err(Error::Decode(format!("quantization step must be > 0, got {step}")));
                }
                if d > self.remaining() {
                    return Err(Error::Decode(format!("vector of length {d} does not fit payload")));
                }
                (0..d)
                    .map(|_| {
                        let v = unzigzag(self.varint()?) as f64 * step;
                        if v.is_finite() {
                            Ok(v)
                        } else {
                            Err(Error::Decode("dequantized value overflows".into()))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            t => return Err(Error::Decode(format!("unknown vector tag {t:#04x}"))),
        };
        Ok(RealVector::from_vec_unchecked(values))
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Decode(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id() -> ClientId {
        ClientId::new("0123456789abcdef")
    }

    #[test]
    fn share_size_matches_layout() {
        let bytes = encode_share(&id(), &[1.0, 2.0, 3.0], &VectorEncoding::F64);
        assert_eq!(bytes.len(), 2 + 16 + 5 + 24);
        match Payload::decode(MessageKind::Share, &bytes).unwrap() {
            Payload::Share { client, vector } => {
                assert_eq!(client, id());
                assert_eq!(vector.as_slice(), &[1.0, 2.0, 3.0]);
            }
            p => panic!("unexpected {p:?}"),
        }
    }

    #[test]
    fn quantized_share_decodes_to_grid() {
        let t = Truncation::new(127.0, 0.5).unwrap();
        let bytes = encode_share(&id(), &[200.0, -0.26, 3.0], &VectorEncoding::Quantized(t));
        // codes 254, -1, 6 → varint sizes 2, 1, 1
        assert_eq!(bytes.len(), 2 + 16 + 5 + 8 + 4);
        let Payload::Share { vector, .. } = Payload::decode(MessageKind::Share, &bytes).unwrap() else {
            panic!()
        };
        assert_eq!(vector.as_slice(), &[127.0, -0.5, 3.0]);
    }

    #[test]
    fn rejects_malformed() {
        let good = encode_share(&id(), &[1.0], &VectorEncoding::F64);
        // trailing byte
        let mut b = good.clone();
        b.push(0);
        assert!(Payload::decode(MessageKind::Share, &b).is_err());
        // truncated
        assert!(Payload::decode(MessageKind::Share, &good[..good.len() - 1]).is_err());
        // non-finite
        let b = encode_share(&id(), &[f64::NAN], &VectorEncoding::F64);
        assert!(Payload::decode(MessageKind::Share, &b).is_err());
        // huge declared length
        let mut b = Vec::new();
        encode_client_id(&mut b, &id());
        b.push(0);
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(Payload::decode(MessageKind::Share, &b).is_err());
        // matrix with overflowing shape
        let mut b = Vec::new();
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(Payload::decode(MessageKind::Matrix, &b).is_err());
        // bad accept bit
        let mut b = encode_accept_bit(&id(), true);
        *b.last_mut().unwrap() = 2;
        assert!(Payload::decode(MessageKind::AcceptBit, &b).is_err());
        // over-long varint
        let mut b = Vec::new();
        encode_client_id(&mut b, &id());
        b.push(1);
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&1.0f64.to_le_bytes());
        b.extend_from_slice(&[0xff; 11]);
        assert!(Payload::decode(MessageKind::Share, &b).is_err());
    }

    #[test]
    fn matrix_and_sets() {
        let m = encode_matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.len(), 8 + 48);
        assert_eq!(
            Payload::decode(MessageKind::Matrix, &m).unwrap(),
            Payload::Matrix { rows: 2, cols: 3, entries: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] }
        );
        let ids = vec![id(), ClientId::new("x")];
        let s = encode_accepted_set(&ids);
        assert_eq!(s.len(), 4 + 18 + 3);
        assert_eq!(Payload::decode(MessageKind::AcceptedSet, &s).unwrap(), Payload::AcceptedSet(ids));
        assert_eq!(
            Payload::decode(MessageKind::AcceptedSet, &encode_accepted_set(&[])).unwrap(),
            Payload::AcceptedSet(vec![])
        );
    }

    proptest! {
        #[test]
        fn vectors_round_trip(values in prop::collection::vec(-1e300f64..1e300, 1..64)) {
            let bytes = encode_share(&id(), &values, &VectorEncoding::F64);
            let Payload::Share { vector, .. } = Payload::decode(MessageKind::Share, &bytes).unwrap() else {
                panic!()
            };
            prop_assert_eq!(vector.as_slice(), &values[..]);
        }

        #[test]
        fn quantized_round_trip_matches_truncation(
            values in prop::collection::vec(-500f64..500.0, 1..64),
            step in 0.01f64..4.0,
        ) {
            let t = Truncation::new(127.0, step).unwrap();
            let bytes = encode_share(&id(), &values, &VectorEncoding::Quantized(t.clone()));
            let expected_len = 2 + 16 + 5 + 8
                + values.iter().map(|&v| varint_len(t.code(v))).sum::<usize>();
            prop_assert_eq!(bytes.len(), expected_len);
            let Payload::Share { vector, .. } = Payload::decode(MessageKind::Share, &bytes).unwrap() else {
                panic!()
            };
            let direct = t.apply(&RealVector::new(values).unwrap());
            prop_assert_eq!(vector, direct);
        }

        #[test]
        fn decoder_never_panics(kind in 0usize..6, bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = Payload::decode(MessageKind::ALL[kind], &bytes);
        }
    }
}
