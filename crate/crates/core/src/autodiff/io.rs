//! Parameter serialization.
//!
//! Binary container, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes   "PAVEPRM1"
//! layers       u32       L
//! dims         L x (u32 inputs, u32 outputs)
//! count        u64       N, must equal sum of inputs*outputs + outputs
//! values       N x f64   flat ParamVector order
//! ```
//!
//! The text export writes one value per line using the shortest decimal
//! representation that round-trips.

use std::io::{BufRead, Read, Write};

use super::params::{LayerShape, ParamVector};
use crate::error::{Error, Result};

pub const PARAM_MAGIC: &[u8; 8] = b"PAVEPRM1";

fn wr(w: &mut impl Write, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes).map_err(|e| Error::io("<stream>", e))
}

pub fn write_params(w: &mut impl Write, p: &ParamVector) -> Result<()> {
    wr(w, PARAM_MAGIC)?;
    wr(w, &(p.layout().len() as u32).to_le_bytes())?;
    for l in p.layout() {
        wr(w, &(l.inputs as u32).to_le_bytes())?;
        wr(w, &(l.outputs as u32).to_le_bytes())?;
    }
    wr(w, &(p.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * p.len());
    for v in p.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    wr(w, &buf)
}

pub(crate) fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Decode(format!("truncated input: {e}")))?;
    Ok(b)
}

pub fn read_params(r: &mut impl Read) -> Result<ParamVector> {
    let magic = read_exact::<8>(r)?;
    if &magic != PARAM_MAGIC {
        return Err(Error::Decode("bad parameter magic".into()));
    }
    let layers = u32::from_le_bytes(read_exact(r)?) as usize;
    if layers == 0 || layers > 1024 {
        return Err(Error::Decode(format!("implausible layer count {layers}")));
    }
    let mut layout = Vec::with_capacity(layers);
    for _ in 0..layers {
        let inputs = u32::from_le_bytes(read_exact(r)?) as usize;
        let outputs = u32::from_le_bytes(read_exact(r)?) as usize;
        layout.push(LayerShape { inputs, outputs });
    }
    let count = u64::from_le_bytes(read_exact(r)?) as usize;
    let expected: usize = layout.iter().map(LayerShape::len).sum();
    if count != expected {
        return Err(Error::Decode(format!(
            "value count {count} does not match layout ({expected})"
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(read_exact(r)?));
    }
    ParamVector::from_parts(layout, values)
}

pub fn write_params_text(w: &mut impl Write, p: &ParamVector) -> Result<()> {
    for v in p.values() {
        writeln!(w, "{v:?}").map_err(|e| Error::io("<stream>", e))?;
    }
    Ok(())
}

/// Read a text export back into the given layout.
pub fn read_params_text(r: impl BufRead, layout: Vec<LayerShape>) -> Result<ParamVector> {
    let mut values = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        values.push(
            t.parse::<f64>()
                .map_err(|e| Error::Decode(format!("line {}: {e}", i + 1)))?,
        );
    }
    ParamVector::from_parts(layout, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> Vec<LayerShape> {
        vec![
            LayerShape { inputs: 2, outputs: 3 },
            LayerShape { inputs: 3, outputs: 1 },
        ]
    }

    proptest! {
        #[test]
        fn binary_and_text_round_trip(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 13)) {
            let p = ParamVector::from_parts(layout(), values).unwrap();
            let mut buf = Vec::new();
            write_params(&mut buf, &p).unwrap();
            prop_assert_eq!(buf.len(), 8 + 4 + 2 * 8 + 8 + 13 * 8);
            let back = read_params(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &p);
            let mut txt = Vec::new();
            write_params_text(&mut txt, &p).unwrap();
            let back = read_params_text(txt.as_slice(), layout()).unwrap();
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn header_is_little_endian() {
        let p = ParamVector::from_parts(vec![LayerShape { inputs: 1, outputs: 1 }], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        assert_eq!(&buf[..8], b"PAVEPRM1");
        assert_eq!(&buf[8..12], &[1, 0, 0, 0]);
        assert_eq!(&buf[12..20], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&buf[20..28], &2u64.to_le_bytes());
        assert_eq!(&buf[28..36], &1.0f64.to_le_bytes());
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(read_params(&mut &b"NOTMAGIC"[..]).is_err());
        let p = ParamVector::zeros(layout());
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_params(&mut buf.as_slice()).is_err());
    }
}
