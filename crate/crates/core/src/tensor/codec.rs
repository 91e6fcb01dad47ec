//! Binary tensor records.
//!
//! Layout: `b"EQT1"`, `u32` dim, `u32` order, `i8` parity, then `dim^order`
//! `f64` components, all little-endian and row-major.

use std::io::{Read, Write};

use super::{Parity, TensorValue};
use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"EQT1";

pub fn write_tensor<W: Write>(w: &mut W, t: &TensorValue) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(t.dim() as u32).to_le_bytes())?;
    w.write_all(&(t.order() as u32).to_le_bytes())?;
    w.write_all(&t.parity().sign().to_le_bytes())?;
    for x in t.components() {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<TensorValue> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad tensor magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let dim = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let order = u32::from_le_bytes(word) as usize;
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    let parity = Parity::from_sign(i8::from_le_bytes(byte)).map_err(|e| Error::Format(e.to_string()))?;
    let len = u32::try_from(order)
        .ok()
        .and_then(|o| dim.checked_pow(o))
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| Error::Format(format!("implausible tensor shape {dim}^{order}")))?;
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    TensorValue::new(dim, order, parity, data)
}

pub fn encode_tensor(t: &TensorValue) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * t.components().len());
    write_tensor(&mut out, t).expect("writing to a Vec cannot fail");
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorValue> {
    let mut cursor = bytes;
    let t = read_tensor(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after tensor record", cursor.len())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = TensorValue::new(2, 3, Parity::Odd, (0..8).map(|i| (i as f64).sin() / 3.0).collect()).unwrap();
        let bytes = encode_tensor(&t);
        assert_eq!(bytes.len(), 4 + 4 + 4 + 1 + 64);
        assert_eq!(&bytes[..4], b"EQT1");
        assert_eq!(decode_tensor(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_tensor(b"NOPE").is_err());
        let mut bytes = encode_tensor(&TensorValue::scalar(3, 1.0).unwrap());
        bytes.push(0);
        assert!(decode_tensor(&bytes).is_err());
        bytes.truncate(10);
        assert!(decode_tensor(&bytes).is_err());
    }
}
