use std::str::FromStr;

use serde_json::{json, Value as Json};

use super::structural::need_int;
use super::{one, port, ty_json, CatalogError, OpError, Operator, Ports};
use crate::circuit::Signature;
use crate::column::{Column, ElementType};

/// Integer or float view of a numeric column.
pub(crate) enum Num {
    I(Vec<i128>),
    F(Vec<f64>),
}

pub(crate) fn numeric(c: &Column) -> Option<Num> {
    if let Some(v) = c.to_i128s() {
        return Some(Num::I(v));
    }
    c.as_f64().map(|v| Num::F(v.to_vec()))
}

pub(crate) fn round_to(ty: &ElementType, x: f64) -> f64 {
    if *ty == ElementType::F32 {
        x as f32 as f64
    } else {
        x
    }
}

pub(crate) fn int_result(ty: &ElementType, v: Vec<i128>, what: &str) -> Result<Column, OpError> {
    Column::from_i128(ty.clone(), v).map_err(|e| OpError::Overflow(format!("{what}: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    Add,
    Max,
    Min,
    And,
    Or,
}

impl Aggregate {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregate::Add => "add",
            Aggregate::Max => "max",
            Aggregate::Min => "min",
            Aggregate::And => "and",
            Aggregate::Or => "or",
        }
    }

    fn check_type(self, ty: &ElementType) -> Result<(), CatalogError> {
        let ok = match self {
            Aggregate::Add | Aggregate::Max | Aggregate::Min => {
                ty.is_numeric() || (*ty == ElementType::Bit && self != Aggregate::Add)
            }
            Aggregate::And | Aggregate::Or => ty.is_integer() || *ty == ElementType::Bit,
        };
        if ok {
            Ok(())
        } else {
            Err(CatalogError::BadParams(format!("aggregate {} is not defined on {ty}", self.as_str())))
        }
    }

    fn neutral_int(self, ty: &ElementType) -> i128 {
        let (lo, hi) = ty.int_range().unwrap();
        match self {
            Aggregate::Add | Aggregate::Or => 0,
            Aggregate::Max => lo,
            Aggregate::Min => hi,
            Aggregate::And => {
                if ty.is_unsigned() || *ty == ElementType::Bit {
                    hi
                } else {
                    -1
                }
            }
        }
    }

    fn neutral_float(self) -> f64 {
        match self {
            Aggregate::Max => f64::NEG_INFINITY,
            Aggregate::Min => f64::INFINITY,
            _ => 0.0,
        }
    }

    fn int(self, a: i128, b: i128) -> i128 {
        match self {
            Aggregate::Add => a + b,
            Aggregate::Max => a.max(b),
            Aggregate::Min => a.min(b),
            Aggregate::And => a & b,
            Aggregate::Or => a | b,
        }
    }

    fn float(self, a: f64, b: f64) -> f64 {
        match self {
            Aggregate::Add => a + b,
            Aggregate::Max => a.max(b),
            Aggregate::Min => a.min(b),
            _ => unreachable!("checked at construction"),
        }
    }
}

impl FromStr for Aggregate {
    type Err = CatalogError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add" | "sum" => Aggregate::Add,
            "max" => Aggregate::Max,
            "min" => Aggregate::Min,
            "and" => Aggregate::And,
            "or" => Aggregate::Or,
            _ => return Err(CatalogError::BadParams(format!("unknown aggregate `{s}`"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregateMode {
    Inclusive,
    Exclusive,
}

/// Running aggregate; every partial result must fit the element type.
fn scan(ty: &ElementType, op: Aggregate, mode: AggregateMode, c: &Column) -> Result<Column, OpError> {
    match numeric(c).expect("numeric column") {
        Num::I(v) => {
            let (lo, hi) = ty.int_range().unwrap();
            let mut acc = op.neutral_int(ty);
            let mut out = Vec::with_capacity(v.len());
            for (i, x) in v.into_iter().enumerate() {
                if mode == AggregateMode::Exclusive {
                    out.push(acc);
                }
                acc = op.int(acc, x);
                if acc < lo || acc > hi {
                    return Err(OpError::Overflow(format!("running {} leaves {ty} at index {i}", op.as_str())));
                }
                if mode == AggregateMode::Inclusive {
                    out.push(acc);
                }
            }
            int_result(ty, out, "prefix aggregate")
        }
        Num::F(v) => {
            let mut acc = op.neutral_float();
            let mut out = Vec::with_capacity(v.len());
            for x in v {
                if mode == AggregateMode::Exclusive {
                    out.push(acc);
                }
                acc = round_to(ty, op.float(acc, x));
                if mode == AggregateMode::Inclusive {
                    out.push(acc);
                }
            }
            Ok(Column::from_f64s(ty.clone(), out)?)
        }
    }
}

#[derive(Debug)]
pub struct PrefixAggregate {
    ty: ElementType,
    op: Aggregate,
    mode: AggregateMode,
    sig: Signature,
}

impl PrefixAggregate {
    pub fn new(ty: ElementType, op: Aggregate, mode: AggregateMode) -> Result<Self, CatalogError> {
        op.check_type(&ty)?;
        let sig = Signature::new().with_input("data", ty.clone()).with_output("aggregates", ty.clone());
        Ok(PrefixAggregate { ty, op, mode, sig })
    }
}

impl Operator for PrefixAggregate {
    fn name(&self) -> &str {
        "prefix_aggregate"
    }
    fn params(&self) -> Json {
        let mode = match self.mode {
            AggregateMode::Inclusive => "inclusive",
            AggregateMode::Exclusive => "exclusive",
        };
        json!({"type": ty_json(&self.ty), "op": self.op.as_str(), "mode": mode})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        Ok(one("aggregates", scan(&self.ty, self.op, self.mode, port(inputs, "data")?)?))
    }
}

/// Total aggregate as a length-1 column (the neutral element when empty).
#[derive(Debug)]
pub struct Reduce {
    ty: ElementType,
    op: Aggregate,
    sig: Signature,
}

impl Reduce {
    pub fn new(ty: ElementType, op: Aggregate) -> Result<Self, CatalogError> {
        op.check_type(&ty)?;
        let sig = Signature::new().with_input("data", ty.clone()).with_output("result", ty.clone());
        Ok(Reduce { ty, op, sig })
    }
}

impl Operator for Reduce {
    fn name(&self) -> &str {
        "reduce"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "op": self.op.as_str()})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let data = port(inputs, "data")?;
        let total = match numeric(data).unwrap() {
            Num::I(v) => {
                let (lo, hi) = self.ty.int_range().unwrap();
                let mut acc = self.op.neutral_int(&self.ty);
                for x in v {
                    acc = self.op.int(acc, x);
                    if acc < lo || acc > hi {
                        return Err(OpError::Overflow(format!("{} leaves {}", self.op.as_str(), self.ty)));
                    }
                }
                int_result(&self.ty, vec![acc], "reduce")?
            }
            Num::F(v) => {
                let acc = v.into_iter().fold(self.op.neutral_float(), |a, x| round_to(&self.ty, self.op.float(a, x)));
                Column::from_f64s(self.ty.clone(), vec![acc])?
            }
        };
        Ok(one("result", total))
    }
}

/// `differences[i] = col[i+1] − col[i]`, in a signed type one width step up.
#[derive(Debug)]
pub struct Derivative {
    ty: ElementType,
    out: ElementType,
    sig: Signature,
}

impl Derivative {
    pub fn new(ty: ElementType) -> Result<Self, CatalogError> {
        let out = match &ty {
            ElementType::Float(_) => ty.clone(),
            t => t
                .widened_signed()
                .ok_or_else(|| CatalogError::BadParams(format!("derivative needs a numeric type, got {t}")))?,
        };
        let sig = Signature::new().with_input("col", ty.clone()).with_output("differences", out.clone());
        Ok(Derivative { ty, out, sig })
    }

    pub fn output_type(ty: &ElementType) -> Option<ElementType> {
        match ty {
            ElementType::Float(_) => Some(ty.clone()),
            t => t.widened_signed(),
        }
    }
}

impl Operator for Derivative {
    fn name(&self) -> &str {
        "derivative"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "col")?;
        if c.is_empty() {
            return Err(OpError::Precondition("derivative of an empty column".into()));
        }
        let out = match numeric(c).unwrap() {
            Num::I(v) => int_result(&self.out, v.windows(2).map(|w| w[1] - w[0]).collect(), "derivative")?,
            Num::F(v) => {
                Column::from_f64s(self.out.clone(), v.windows(2).map(|w| round_to(&self.out, w[1] - w[0])).collect())?
            }
        };
        Ok(one("differences", out))
    }
}

#[derive(Debug)]
pub struct IsSameAsPrevious {
    ty: ElementType,
    sig: Signature,
}

impl IsSameAsPrevious {
    pub fn new(ty: ElementType) -> Self {
        let sig = Signature::new().with_input("col", ty.clone()).with_output("result", ElementType::Bit);
        IsSameAsPrevious { ty, sig }
    }
}

impl Operator for IsSameAsPrevious {
    fn name(&self) -> &str {
        "is_same_as_previous"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "col")?;
        let bits = (0..c.len()).map(|i| i > 0 && c.value(i) == c.value(i - 1));
        Ok(one("result", Column::bits(bits.collect())))
    }
}

#[derive(Debug)]
pub struct SplitFirst {
    ty: ElementType,
    sig: Signature,
}

impl SplitFirst {
    pub fn new(ty: ElementType) -> Self {
        let sig = Signature::new()
            .with_input("col", ty.clone())
            .with_output("head", ty.clone())
            .with_output("tail", ty.clone());
        SplitFirst { ty, sig }
    }
}

impl Operator for SplitFirst {
    fn name(&self) -> &str {
        "split_first"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "col")?;
        if c.is_empty() {
            return Err(OpError::Precondition("split_first of an empty column".into()));
        }
        let mut out = one("head", c.slice(0, 1));
        out.insert("tail".into(), c.slice(1, c.len()));
        Ok(out)
    }
}

/// Splits `w`-bit values into their top `p` bits and the remaining `w − p` bits.
#[derive(Debug)]
pub struct Carve {
    ty: ElementType,
    w: u8,
    p: u8,
    sig: Signature,
}

impl Carve {
    pub fn new(ty: ElementType, w: u8, p: u8) -> Result<Self, CatalogError> {
        need_int(&ty, "carve input")?;
        if !ty.is_unsigned() {
            return Err(CatalogError::BadParams("carve input must be unsigned".into()));
        }
        if !(0 < p && p < w && w <= 64) {
            return Err(CatalogError::BadParams(format!("carve needs 0 < p < w <= 64, got w={w}, p={p}")));
        }
        let sig = Signature::new()
            .with_input("col", ty.clone())
            .with_output("prefixes", ElementType::UInt(p))
            .with_output("suffixes", ElementType::UInt(w - p));
        Ok(Carve { ty, w, p, sig })
    }
}

impl Operator for Carve {
    fn name(&self) -> &str {
        "carve"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "w": self.w, "p": self.p})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "col")?;
        let v = c.as_u64().unwrap();
        let low = (self.w - self.p) as u32;
        if self.w < 64 {
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| **x >> self.w != 0) {
                return Err(OpError::OutOfRange(format!("value {x} at {i} exceeds {} bits", self.w)));
            }
        }
        let pre = v.iter().map(|x| x >> low).collect();
        let suf = v.iter().map(|x| x & ((1u64 << low) - 1)).collect();
        let mut out = one("prefixes", Column::from_u64s(ElementType::UInt(self.p), pre)?);
        out.insert("suffixes".into(), Column::from_u64s(ElementType::UInt(self.w - self.p), suf)?);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::ElementType as T;

    fn ports(items: &[(&str, Column)]) -> Ports {
        items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn u(v: &[u64]) -> Column {
        Column::u64s(v.to_vec())
    }

    #[test]
    fn derivative_examples() {
        let op = Derivative::new(T::U64).unwrap();
        let r = op.apply(&ports(&[("col", u(&[1, 4, 6]))])).unwrap();
        assert_eq!(r["differences"], Column::i64s(vec![3, 2]));
        assert!(op.apply(&ports(&[("col", u(&[5]))])).unwrap()["differences"].is_empty());
        assert!(op.apply(&ports(&[("col", u(&[]))])).is_err());
        assert!(op.apply(&ports(&[("col", u(&[0, u64::MAX]))])).is_err());
        let narrow = Derivative::new(T::U8).unwrap();
        assert_eq!(narrow.signature().outputs["differences"], T::I16);
    }

    #[test]
    fn prefix_examples() {
        let add = |mode| PrefixAggregate::new(T::U64, Aggregate::Add, mode).unwrap();
        let r = add(AggregateMode::Inclusive).apply(&ports(&[("data", u(&[1, 2, 3]))])).unwrap();
        assert_eq!(r["aggregates"], u(&[1, 3, 6]));
        let r = add(AggregateMode::Exclusive).apply(&ports(&[("data", u(&[1, 2, 3]))])).unwrap();
        assert_eq!(r["aggregates"], u(&[0, 1, 3]));
        let max = PrefixAggregate::new(T::U64, Aggregate::Max, AggregateMode::Inclusive).unwrap();
        assert_eq!(max.apply(&ports(&[("data", u(&[2, 1, 5]))])).unwrap()["aggregates"], u(&[2, 2, 5]));
        let small = PrefixAggregate::new(T::U8, Aggregate::Add, AggregateMode::Inclusive).unwrap();
        let c = Column::from_u64s(T::U8, vec![200, 100]).unwrap();
        assert!(small.apply(&ports(&[("data", c)])).is_err());
    }

    #[test]
    fn reduce_examples() {
        let op = Reduce::new(T::U64, Aggregate::Add).unwrap();
        assert_eq!(op.apply(&ports(&[("data", u(&[1, 2, 3]))])).unwrap()["result"], u(&[6]));
        assert_eq!(op.apply(&ports(&[("data", u(&[]))])).unwrap()["result"], u(&[0]));
    }

    #[test]
    fn same_as_previous_and_split() {
        let op = IsSameAsPrevious::new(T::U64);
        let r = op.apply(&ports(&[("col", u(&[1, 1, 2, 2, 2]))])).unwrap();
        assert_eq!(r["result"], Column::bools(&[false, true, false, true, true]));
        let s = SplitFirst::new(T::U64);
        let r = s.apply(&ports(&[("col", u(&[9, 1, 2]))])).unwrap();
        assert_eq!((r["head"].clone(), r["tail"].clone()), (u(&[9]), u(&[1, 2])));
        assert!(s.apply(&ports(&[("col", u(&[]))])).is_err());
    }

    #[test]
    fn carve_examples() {
        let op = Carve::new(T::U8, 8, 3).unwrap();
        let r = op.apply(&ports(&[("col", Column::from_u64s(T::U8, vec![181, 0]).unwrap())])).unwrap();
        assert_eq!(r["prefixes"], Column::from_u64s(T::UInt(3), vec![5, 0]).unwrap());
        assert_eq!(r["suffixes"], Column::from_u64s(T::UInt(5), vec![21, 0]).unwrap());
        assert!(Carve::new(T::U8, 8, 8).is_err());
    }
}
