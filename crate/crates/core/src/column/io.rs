//! The `.col` binary format.
//!
//! Layout: `CCOL1`, a type header, the length as a little-endian u64, then the
//! values. Integers and floats take `ceil(width/8)` little-endian bytes each;
//! bit columns are packed LSB first. A product header stores its component
//! count in the width byte followed by each component header, and the values
//! are written one component after another.

use std::io::{Read, Write};
use std::path::Path;

use super::{Bits, Column, ColumnError, ElementType, Kind};

pub const MAGIC: &[u8; 5] = b"CCOL1";

fn write_type(out: &mut Vec<u8>, ty: &ElementType) {
    out.push(ty.kind().tag());
    match ty {
        ElementType::Product(cs) => {
            out.push(cs.len() as u8);
            for c in cs {
                write_type(out, c);
            }
        }
        t => out.push(t.width_bits() as u8),
    }
}

fn write_values(out: &mut Vec<u8>, col: &Column) {
    let ty = col.element_type();
    let nbytes = (ty.width_bits() as usize).div_ceil(8);
    match ty {
        ElementType::UInt(_) => {
            for v in col.as_u64().unwrap() {
                out.extend_from_slice(&v.to_le_bytes()[..nbytes]);
            }
        }
        ElementType::Int(_) => {
            for v in col.as_i64().unwrap() {
                out.extend_from_slice(&v.to_le_bytes()[..nbytes]);
            }
        }
        ElementType::Float(32) => {
            for v in col.as_f64().unwrap() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        ElementType::Float(_) => {
            for v in col.as_f64().unwrap() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        ElementType::Bit => out.extend_from_slice(&col.as_bits().unwrap().to_bytes()),
        ElementType::Unit | ElementType::Bottom => {}
        ElementType::Product(_) => {
            for c in col.components().unwrap() {
                write_values(out, c);
            }
        }
    }
}

pub fn to_bytes(col: &Column) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    write_type(&mut out, col.element_type());
    out.extend_from_slice(&(col.len() as u64).to_le_bytes());
    write_values(&mut out, col);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ColumnError> {
        let end = self.at.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| ColumnError::Format("truncated data".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, ColumnError> {
        Ok(self.take(1)?[0])
    }
}

fn read_type(cur: &mut Cursor<'_>, depth: usize) -> Result<ElementType, ColumnError> {
    if depth > 32 {
        return Err(ColumnError::Format("type nesting too deep".into()));
    }
    let tag = cur.byte()?;
    let w = cur.byte()?;
    let kind = Kind::from_tag(tag).ok_or_else(|| ColumnError::Format(format!("unknown type tag {tag}")))?;
    let ty = match kind {
        Kind::Unsigned => ElementType::UInt(w),
        Kind::Signed => ElementType::Int(w),
        Kind::Float => ElementType::Float(w),
        Kind::Bit => ElementType::Bit,
        Kind::Unit => ElementType::Unit,
        Kind::Bottom => ElementType::Bottom,
        Kind::Product => {
            let cs = (0..w).map(|_| read_type(cur, depth + 1)).collect::<Result<Vec<_>, _>>()?;
            ElementType::Product(cs)
        }
    };
    let expected_w = match kind {
        Kind::Product => w,
        _ => ty.width_bits() as u8,
    };
    if expected_w != w {
        return Err(ColumnError::Format(format!("width byte {w} does not match {ty}")));
    }
    ty.check()?;
    Ok(ty)
}

fn read_values(cur: &mut Cursor<'_>, ty: &ElementType, len: usize) -> Result<Column, ColumnError> {
    let nbytes = (ty.width_bits() as usize).div_ceil(8);
    let word = |cur: &mut Cursor<'_>| -> Result<[u8; 8], ColumnError> {
        let mut b = [0u8; 8];
        b[..nbytes].copy_from_slice(cur.take(nbytes)?);
        Ok(b)
    };
    // Guard against absurd lengths before allocating.
    let need = match ty {
        ElementType::Bit => len.div_ceil(8),
        ElementType::Product(_) => 0,
        _ => nbytes.saturating_mul(len),
    };
    if need > cur.buf.len() - cur.at {
        return Err(ColumnError::Format("truncated data".into()));
    }
    match ty {
        ElementType::UInt(_) => {
            let vals = (0..len).map(|_| word(cur).map(u64::from_le_bytes)).collect::<Result<Vec<_>, _>>()?;
            Column::from_u64s(ty.clone(), vals)
        }
        ElementType::Int(_) => {
            let shift = 64 - 8 * nbytes as u32;
            let vals = (0..len)
                .map(|_| word(cur).map(|b| (i64::from_le_bytes(b) << shift) >> shift))
                .collect::<Result<Vec<_>, _>>()?;
            Column::from_i64s(ty.clone(), vals)
        }
        ElementType::Float(32) => {
            let vals = (0..len)
                .map(|_| cur.take(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64))
                .collect::<Result<Vec<_>, _>>()?;
            Column::from_f64s(ty.clone(), vals)
        }
        ElementType::Float(_) => {
            let vals = (0..len)
                .map(|_| cur.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
                .collect::<Result<Vec<_>, _>>()?;
            Column::from_f64s(ty.clone(), vals)
        }
        ElementType::Bit => {
            let bytes = cur.take(len.div_ceil(8))?;
            let bits =
                Bits::from_bytes(bytes, len).ok_or_else(|| ColumnError::Format("nonzero padding bits".into()))?;
            Ok(Column::bits(bits))
        }
        ElementType::Unit => Ok(Column::units(len)),
        ElementType::Bottom => {
            if len != 0 {
                return Err(ColumnError::Format("bottom column with nonzero length".into()));
            }
            Ok(Column::empty(ElementType::Bottom))
        }
        ElementType::Product(cs) => {
            let comps = cs.iter().map(|c| read_values(cur, c, len)).collect::<Result<Vec<_>, _>>()?;
            if comps.is_empty() {
                return Err(ColumnError::Format("empty product type".into()));
            }
            Column::zip(comps)
        }
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Column, ColumnError> {
    let mut cur = Cursor { buf, at: 0 };
    if cur.take(5)? != MAGIC {
        return Err(ColumnError::Format("bad magic".into()));
    }
    let ty = read_type(&mut cur, 0)?;
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| ColumnError::Format("length too large".into()))?;
    if matches!(ty, ElementType::Unit) && len > (1 << 40) {
        return Err(ColumnError::Format("length too large".into()));
    }
    let col = read_values(&mut cur, &ty, len)?;
    if cur.at != buf.len() {
        return Err(ColumnError::Format(format!("{} trailing bytes", buf.len() - cur.at)));
    }
    Ok(col)
}

pub fn write_to(w: &mut impl Write, col: &Column) -> Result<(), ColumnError> {
    w.write_all(&to_bytes(col))?;
    Ok(())
}

pub fn read_from(r: &mut impl Read) -> Result<Column, ColumnError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

pub fn write_file(path: impl AsRef<Path>, col: &Column) -> Result<(), ColumnError> {
    std::fs::write(path, to_bytes(col))?;
    Ok(())
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Column, ColumnError> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::Value;

    fn roundtrip(c: &Column) {
        assert_eq!(&from_bytes(&to_bytes(c)).unwrap(), c);
    }

    #[test]
    fn header_layout() {
        let c = Column::from_u64s(ElementType::U16, vec![1, 0x0203]).unwrap();
        let b = to_bytes(&c);
        assert_eq!(&b[..5], b"CCOL1");
        assert_eq!(&b[5..7], &[0, 16]);
        assert_eq!(&b[7..15], &2u64.to_le_bytes());
        assert_eq!(&b[15..], &[1, 0, 3, 2]);
    }

    #[test]
    fn all_kinds_roundtrip() {
        roundtrip(&Column::from_i64s(ElementType::Int(12), vec![-2048, 2047, 0, -1]).unwrap());
        roundtrip(&Column::from_u64s(ElementType::UInt(3), vec![7, 0, 5]).unwrap());
        roundtrip(&Column::i64s(vec![i64::MIN, i64::MAX]));
        roundtrip(&Column::from_f64s(ElementType::F32, vec![0.5, -3.25]).unwrap());
        roundtrip(&Column::from_f64s(ElementType::F64, vec![0.1, f64::NAN, -0.0]).unwrap());
        roundtrip(&Column::bools(&[true, false, true, true, false, false, false, false, true]));
        roundtrip(&Column::units(5));
        roundtrip(&Column::empty(ElementType::Bottom));
        roundtrip(&Column::empty(ElementType::U8));
        let z = Column::zip(vec![Column::u64s(vec![1, 2]), Column::bools(&[true, false])]).unwrap();
        roundtrip(&z);
        assert_eq!(from_bytes(&to_bytes(&z)).unwrap().value(0), Value::Tuple(vec![1u64.into(), true.into()]));
    }

    #[test]
    fn rejects_malformed() {
        let c = Column::from_u64s(ElementType::U8, vec![1, 2]).unwrap();
        let mut b = to_bytes(&c);
        b.push(0);
        assert!(from_bytes(&b).is_err());
        b.truncate(b.len() - 2);
        assert!(from_bytes(&b).is_err());
        assert!(from_bytes(b"CCOL2").is_err());
        let over = Column::from_u64s(ElementType::U8, vec![255]).unwrap();
        let mut b = to_bytes(&over);
        b[6] = 7;
        assert!(from_bytes(&b).is_err());
    }
}
