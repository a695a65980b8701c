use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde_json::Value as Json;

use super::{ColumnError, ElementType};

/// A single element value.
///
/// Floats compare by total order and hash by bit pattern, so `Value` can key maps.
#[derive(Clone, Debug)]
pub enum Value {
    UInt(u64),
    Int(i64),
    Float(f64),
    Bit(bool),
    Unit,
    Tuple(Vec<Value>),
}

impl Value {
    fn rank(&self) -> u8 {
        match self {
            Value::UInt(_) | Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::Bit(_) => 2,
            Value::Unit => 3,
            Value::Tuple(_) => 4,
        }
    }

    /// Integer view of integer and bit values.
    pub fn as_i128(&self) -> Option<i128> {
        match self {
            Value::UInt(v) => Some(*v as i128),
            Value::Int(v) => Some(*v as i128),
            Value::Bit(b) => Some(*b as i128),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        self.as_i128().and_then(|v| u64::try_from(v).ok())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bit(b) => Some(*b),
            _ => None,
        }
    }

    /// Converts this value into the canonical representation for `ty`, if it lies in the domain.
    pub fn coerce(&self, ty: &ElementType) -> Option<Value> {
        match ty {
            ElementType::UInt(_) | ElementType::Int(_) | ElementType::Bit => {
                let v = self.as_i128()?;
                let (lo, hi) = ty.int_range()?;
                if v < lo || v > hi {
                    return None;
                }
                Some(match ty {
                    ElementType::UInt(_) => Value::UInt(v as u64),
                    ElementType::Int(_) => Value::Int(v as i64),
                    _ => Value::Bit(v == 1),
                })
            }
            ElementType::Float(w) => {
                let f = match self {
                    Value::Float(f) => *f,
                    _ => return None,
                };
                if *w == 32 && !f.is_nan() && (f as f32) as f64 != f {
                    return None;
                }
                Some(Value::Float(f))
            }
            ElementType::Unit => matches!(self, Value::Unit).then_some(Value::Unit),
            ElementType::Bottom => None,
            ElementType::Product(cs) => match self {
                Value::Tuple(vs) if vs.len() == cs.len() => {
                    Some(Value::Tuple(vs.iter().zip(cs).map(|(v, t)| v.coerce(t)).collect::<Option<Vec<_>>>()?))
                }
                _ => None,
            },
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::UInt(v) => Json::from(*v),
            Value::Int(v) => Json::from(*v),
            Value::Float(f) => serde_json::Number::from_f64(*f).map(Json::Number).unwrap_or(Json::Null),
            Value::Bit(b) => Json::Bool(*b),
            Value::Unit => Json::Null,
            Value::Tuple(vs) => Json::Array(vs.iter().map(|v| v.to_json()).collect()),
        }
    }

    /// Reads a JSON literal as a value of `ty`.
    pub fn from_json(json: &Json, ty: &ElementType) -> Result<Value, ColumnError> {
        let bad = || ColumnError::ValueOutOfDomain { index: 0, value: json.to_string(), ty: ty.clone() };
        let raw = match (ty, json) {
            (ElementType::UInt(_), Json::Number(n)) => Value::UInt(n.as_u64().ok_or_else(bad)?),
            (ElementType::Int(_), Json::Number(n)) => Value::Int(n.as_i64().ok_or_else(bad)?),
            (ElementType::Float(_), Json::Number(n)) => Value::Float(n.as_f64().ok_or_else(bad)?),
            (ElementType::Bit, Json::Bool(b)) => Value::Bit(*b),
            (ElementType::Bit, Json::Number(n)) => Value::Bit(match n.as_u64() {
                Some(0) => false,
                Some(1) => true,
                _ => return Err(bad()),
            }),
            (ElementType::Unit, Json::Null) => Value::Unit,
            (ElementType::Product(cs), Json::Array(xs)) if xs.len() == cs.len() => {
                Value::Tuple(xs.iter().zip(cs).map(|(x, t)| Value::from_json(x, t)).collect::<Result<_, _>>()?)
            }
            _ => return Err(bad()),
        };
        raw.coerce(ty).ok_or_else(bad)
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Bit(a), Value::Bit(b)) => a.cmp(b),
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (Value::Tuple(a), Value::Tuple(b)) => a.cmp(b),
            _ => match (self.as_i128(), other.as_i128()) {
                (Some(a), Some(b)) if self.rank() == 0 && other.rank() == 0 => a.cmp(&b),
                _ => self.rank().cmp(&other.rank()),
            },
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::UInt(_) | Value::Int(_) => self.as_i128().hash(state),
            Value::Float(f) => f.to_bits().hash(state),
            Value::Bit(b) => b.hash(state),
            Value::Unit => {}
            Value::Tuple(vs) => vs.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::UInt(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Bit(b) => f.write_str(if *b { "T" } else { "F" }),
            Value::Unit => f.write_str("()"),
            Value::Tuple(vs) => {
                f.write_str("(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bit(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_integer_equality() {
        assert_eq!(Value::UInt(3), Value::Int(3));
        assert!(Value::Int(-1) < Value::UInt(0));
    }

    #[test]
    fn float_bit_exact() {
        assert_ne!(Value::Float(0.0), Value::Float(-0.0));
        assert_eq!(Value::Float(f64::NAN), Value::Float(f64::NAN));
    }

    #[test]
    fn coerce_checks_domain() {
        assert_eq!(Value::UInt(300).coerce(&ElementType::U8), None);
        assert_eq!(Value::Int(-128).coerce(&ElementType::I8), Some(Value::Int(-128)));
        assert_eq!(Value::Float(0.1).coerce(&ElementType::F32), None);
        assert_eq!(Value::Float(0.5).coerce(&ElementType::F32), Some(Value::Float(0.5)));
    }

    #[test]
    fn json_roundtrip() {
        let t: ElementType = "(u8,bit,i16)".parse().unwrap();
        let v = Value::Tuple(vec![Value::UInt(7), Value::Bit(true), Value::Int(-5)]);
        assert_eq!(Value::from_json(&v.to_json(), &t).unwrap(), v);
    }
}
