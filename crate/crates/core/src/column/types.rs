use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ColumnError;

/// Widest product type accepted, in bits.
pub const MAX_PRODUCT_WIDTH: u32 = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Unsigned,
    Signed,
    Float,
    Bit,
    Unit,
    Bottom,
    Product,
}

impl Kind {
    pub fn tag(self) -> u8 {
        match self {
            Kind::Unsigned => 0,
            Kind::Signed => 1,
            Kind::Float => 2,
            Kind::Bit => 3,
            Kind::Unit => 4,
            Kind::Bottom => 5,
            Kind::Product => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Kind> {
        Some(match tag {
            0 => Kind::Unsigned,
            1 => Kind::Signed,
            2 => Kind::Float,
            3 => Kind::Bit,
            4 => Kind::Unit,
            5 => Kind::Bottom,
            6 => Kind::Product,
            _ => return None,
        })
    }
}

/// A fixed-width element type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementType {
    UInt(u8),
    Int(u8),
    Float(u8),
    Bit,
    Unit,
    Bottom,
    Product(Vec<ElementType>),
}

impl ElementType {
    pub const U8: ElementType = ElementType::UInt(8);
    pub const U16: ElementType = ElementType::UInt(16);
    pub const U32: ElementType = ElementType::UInt(32);
    pub const U64: ElementType = ElementType::UInt(64);
    pub const I8: ElementType = ElementType::Int(8);
    pub const I16: ElementType = ElementType::Int(16);
    pub const I32: ElementType = ElementType::Int(32);
    pub const I64: ElementType = ElementType::Int(64);
    pub const F32: ElementType = ElementType::Float(32);
    pub const F64: ElementType = ElementType::Float(64);

    pub fn uint(bits: u8) -> Result<Self, ColumnError> {
        let t = ElementType::UInt(bits);
        t.check()?;
        Ok(t)
    }

    pub fn int(bits: u8) -> Result<Self, ColumnError> {
        let t = ElementType::Int(bits);
        t.check()?;
        Ok(t)
    }

    pub fn product(components: Vec<ElementType>) -> Result<Self, ColumnError> {
        let t = ElementType::Product(components);
        t.check()?;
        Ok(t)
    }

    /// Checks the width constraints of this type and of any components.
    pub fn check(&self) -> Result<(), ColumnError> {
        match self {
            ElementType::UInt(w) | ElementType::Int(w) if !(1..=64).contains(w) => {
                Err(ColumnError::InvalidType(format!("integer width {w} outside 1..=64")))
            }
            ElementType::Float(w) if *w != 32 && *w != 64 => {
                Err(ColumnError::InvalidType(format!("float width {w} is not 32 or 64")))
            }
            ElementType::Product(cs) => {
                for c in cs {
                    c.check()?;
                }
                if self.width_bits() > MAX_PRODUCT_WIDTH {
                    return Err(ColumnError::InvalidType(format!(
                        "product width {} exceeds {MAX_PRODUCT_WIDTH}",
                        self.width_bits()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            ElementType::UInt(_) => Kind::Unsigned,
            ElementType::Int(_) => Kind::Signed,
            ElementType::Float(_) => Kind::Float,
            ElementType::Bit => Kind::Bit,
            ElementType::Unit => Kind::Unit,
            ElementType::Bottom => Kind::Bottom,
            ElementType::Product(_) => Kind::Product,
        }
    }

    pub fn width_bits(&self) -> u32 {
        match self {
            ElementType::UInt(w) | ElementType::Int(w) | ElementType::Float(w) => *w as u32,
            ElementType::Bit => 1,
            ElementType::Unit | ElementType::Bottom => 0,
            ElementType::Product(cs) => cs.iter().map(|c| c.width_bits()).sum(),
        }
    }

    pub fn components(&self) -> Option<&[ElementType]> {
        match self {
            ElementType::Product(cs) => Some(cs),
            _ => None,
        }
    }

    pub fn is_unsigned(&self) -> bool {
        matches!(self, ElementType::UInt(_))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, ElementType::UInt(_) | ElementType::Int(_))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ElementType::UInt(_) | ElementType::Int(_) | ElementType::Float(_))
    }

    /// Inclusive integer range of an integer or bit type.
    pub fn int_range(&self) -> Option<(i128, i128)> {
        match self {
            ElementType::UInt(w) => Some((0, (1i128 << *w) - 1)),
            ElementType::Int(w) => Some((-(1i128 << (*w - 1)), (1i128 << (*w - 1)) - 1)),
            ElementType::Bit => Some((0, 1)),
            _ => None,
        }
    }

    /// Smallest unsigned type of width 8, 16, 32 or 64 holding `max`.
    pub fn unsigned_for(max: u64) -> ElementType {
        match max {
            0..=0xff => ElementType::U8,
            0x100..=0xffff => ElementType::U16,
            0x1_0000..=0xffff_ffff => ElementType::U32,
            _ => ElementType::U64,
        }
    }

    /// Smallest signed type of width 8, 16, 32 or 64 holding `[lo, hi]`.
    pub fn signed_for(lo: i64, hi: i64) -> ElementType {
        for w in [8u8, 16, 32] {
            let half = 1i64 << (w - 1);
            if lo >= -half && hi < half {
                return ElementType::Int(w);
            }
        }
        ElementType::I64
    }

    /// The signed type one standard width step above this integer type (u8 -> i16).
    pub fn widened_signed(&self) -> Option<ElementType> {
        let w = match self {
            ElementType::UInt(w) | ElementType::Int(w) => *w,
            _ => return None,
        };
        let next = [8u8, 16, 32, 64].into_iter().find(|s| *s > w).unwrap_or(64);
        Some(ElementType::Int(next))
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementType::UInt(w) => write!(f, "u{w}"),
            ElementType::Int(w) => write!(f, "i{w}"),
            ElementType::Float(w) => write!(f, "f{w}"),
            ElementType::Bit => f.write_str("bit"),
            ElementType::Unit => f.write_str("unit"),
            ElementType::Bottom => f.write_str("bottom"),
            ElementType::Product(cs) => {
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for ElementType {
    type Err = ColumnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TypeParser { s: s.as_bytes(), i: 0 };
        let t = p.parse()?;
        if p.i != p.s.len() {
            return Err(ColumnError::InvalidType(format!("trailing input in type `{s}`")));
        }
        t.check()?;
        Ok(t)
    }
}

struct TypeParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl TypeParser<'_> {
    fn err(&self) -> ColumnError {
        ColumnError::InvalidType(format!("cannot parse type `{}`", String::from_utf8_lossy(self.s)))
    }

    fn parse(&mut self) -> Result<ElementType, ColumnError> {
        while self.i < self.s.len() && self.s[self.i] == b' ' {
            self.i += 1;
        }
        if self.s.get(self.i) == Some(&b'(') {
            self.i += 1;
            let mut cs = Vec::new();
            if self.s.get(self.i) == Some(&b')') {
                self.i += 1;
                return Ok(ElementType::Product(cs));
            }
            loop {
                cs.push(self.parse()?);
                while self.s.get(self.i) == Some(&b' ') {
                    self.i += 1;
                }
                match self.s.get(self.i) {
                    Some(b',') => self.i += 1,
                    Some(b')') => {
                        self.i += 1;
                        return Ok(ElementType::Product(cs));
                    }
                    _ => return Err(self.err()),
                }
            }
        }
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_alphanumeric() {
            self.i += 1;
        }
        let word = std::str::from_utf8(&self.s[start..self.i]).map_err(|_| self.err())?;
        match word {
            "bit" | "bool" => return Ok(ElementType::Bit),
            "unit" => return Ok(ElementType::Unit),
            "bottom" => return Ok(ElementType::Bottom),
            _ => {}
        }
        let (head, digits) = word.split_at(word.len().min(1));
        let w: u8 = digits.parse().map_err(|_| self.err())?;
        match head {
            "u" => Ok(ElementType::UInt(w)),
            "i" => Ok(ElementType::Int(w)),
            "f" => Ok(ElementType::Float(w)),
            _ => Err(self.err()),
        }
    }
}

impl Serialize for ElementType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_roundtrip() {
        for s in ["u8", "i16", "f32", "bit", "unit", "bottom", "(u8,(bit,i64))", "()"] {
            let t: ElementType = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
    }

    #[test]
    fn widths() {
        assert_eq!(ElementType::Bit.width_bits(), 1);
        assert_eq!(ElementType::Unit.width_bits(), 0);
        let p: ElementType = "(u8,u16,bit)".parse().unwrap();
        assert_eq!(p.width_bits(), 25);
    }

    #[test]
    fn invalid_widths() {
        assert!("u0".parse::<ElementType>().is_err());
        assert!("u65".parse::<ElementType>().is_err());
        assert!("f16".parse::<ElementType>().is_err());
        let wide = format!("({})", vec!["u64"; 9].join(","));
        assert!(wide.parse::<ElementType>().is_err());
    }

    #[test]
    fn widening() {
        assert_eq!(ElementType::U8.widened_signed(), Some(ElementType::I16));
        assert_eq!(ElementType::UInt(5).widened_signed(), Some(ElementType::I8));
        assert_eq!(ElementType::U64.widened_signed(), Some(ElementType::I64));
    }
}
