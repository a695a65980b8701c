use std::cmp::Ordering;

use serde_json::{json, Value as Json};

use super::arith::{int_result, numeric, round_to, Num};
use super::{port, ty_json, CatalogError, OpError, Operator, Params, Ports};
use crate::circuit::Signature;
use crate::column::{Column, ElementType, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn parse(s: &str) -> Result<Self, CatalogError> {
        Ok(match s {
            "eq" => CmpOp::Eq,
            "ne" => CmpOp::Ne,
            "lt" => CmpOp::Lt,
            "le" => CmpOp::Le,
            "gt" => CmpOp::Gt,
            "ge" => CmpOp::Ge,
            _ => return Err(CatalogError::BadParams(format!("unknown comparison `{s}`"))),
        })
    }

    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    fn holds(self, o: Option<Ordering>) -> bool {
        match o {
            None => self == CmpOp::Ne,
            Some(o) => match self {
                CmpOp::Eq => o == Ordering::Equal,
                CmpOp::Ne => o != Ordering::Equal,
                CmpOp::Lt => o == Ordering::Less,
                CmpOp::Le => o != Ordering::Greater,
                CmpOp::Gt => o == Ordering::Greater,
                CmpOp::Ge => o != Ordering::Less,
            },
        }
    }
}

/// The builtin per-element functions.
#[derive(Clone, Debug, PartialEq)]
pub enum ElementwiseFn {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Min,
    Max,
    And,
    Or,
    Not,
    Eq,
    Lt,
    Le,
    /// Closed range test `lo <= x <= hi`.
    InRange {
        lo: Value,
        hi: Value,
    },
    CompareConst {
        cmp: CmpOp,
        value: Value,
    },
    Identity,
    Cast {
        to: ElementType,
    },
    /// `min(x, k)`.
    ClipBy {
        k: Value,
    },
    /// `x · k`.
    Scale {
        k: Value,
    },
    TupleMake {
        k: usize,
    },
    Carve {
        w: u8,
        p: u8,
    },
}

impl ElementwiseFn {
    pub fn id(&self) -> &'static str {
        match self {
            ElementwiseFn::Add => "add",
            ElementwiseFn::Sub => "sub",
            ElementwiseFn::Mul => "mul",
            ElementwiseFn::Div => "div",
            ElementwiseFn::Mod => "mod",
            ElementwiseFn::Min => "min",
            ElementwiseFn::Max => "max",
            ElementwiseFn::And => "and",
            ElementwiseFn::Or => "or",
            ElementwiseFn::Not => "not",
            ElementwiseFn::Eq => "eq",
            ElementwiseFn::Lt => "lt",
            ElementwiseFn::Le => "le",
            ElementwiseFn::InRange { .. } => "in_range",
            ElementwiseFn::CompareConst { .. } => "select_const_compare",
            ElementwiseFn::Identity => "identity",
            ElementwiseFn::Cast { .. } => "cast",
            ElementwiseFn::ClipBy { .. } => "clip_by",
            ElementwiseFn::Scale { .. } => "scale",
            ElementwiseFn::TupleMake { .. } => "tuple_make",
            ElementwiseFn::Carve { .. } => "carve",
        }
    }

    fn arity(&self) -> usize {
        match self {
            ElementwiseFn::Add
            | ElementwiseFn::Sub
            | ElementwiseFn::Mul
            | ElementwiseFn::Div
            | ElementwiseFn::Mod
            | ElementwiseFn::Min
            | ElementwiseFn::Max
            | ElementwiseFn::And
            | ElementwiseFn::Or
            | ElementwiseFn::Eq
            | ElementwiseFn::Lt
            | ElementwiseFn::Le => 2,
            ElementwiseFn::TupleMake { k } => *k,
            _ => 1,
        }
    }
}

fn in_labels(f: &ElementwiseFn) -> Vec<String> {
    match f.arity() {
        1 if !matches!(f, ElementwiseFn::TupleMake { .. }) => vec!["arg".into()],
        2 if !matches!(f, ElementwiseFn::TupleMake { .. }) => vec!["lhs".into(), "rhs".into()],
        k => (1..=k).map(|i| format!("arg_{i}")).collect(),
    }
}

/// Applies a fixed function at every index of equal-length input columns.
#[derive(Debug)]
pub struct Elementwise {
    name: String,
    f: ElementwiseFn,
    types: Vec<ElementType>,
    sig: Signature,
}

fn bad(msg: String) -> CatalogError {
    CatalogError::BadParams(msg)
}

impl Elementwise {
    pub fn new(f: ElementwiseFn, types: Vec<ElementType>) -> Result<Self, CatalogError> {
        let labels = in_labels(&f);
        if types.len() != labels.len() {
            return Err(bad(format!("{} takes {} inputs, got {} types", f.id(), labels.len(), types.len())));
        }
        let t0 = types.first().cloned().ok_or_else(|| bad("elementwise needs an input".into()))?;
        let fid = f.id();
        let same = || {
            if types.iter().all(|t| *t == t0) {
                Ok(())
            } else {
                Err(bad(format!("{fid} needs equal input types")))
            }
        };
        let mut f = f;
        let mut outputs = vec![("result".to_string(), t0.clone())];
        match &mut f {
            ElementwiseFn::Add
            | ElementwiseFn::Sub
            | ElementwiseFn::Mul
            | ElementwiseFn::Div
            | ElementwiseFn::Min
            | ElementwiseFn::Max => {
                same()?;
                if !t0.is_numeric() {
                    return Err(bad(format!("{} needs numeric inputs, got {t0}", f.id())));
                }
            }
            ElementwiseFn::Mod => {
                same()?;
                if !t0.is_integer() {
                    return Err(bad(format!("mod needs integer inputs, got {t0}")));
                }
            }
            ElementwiseFn::And | ElementwiseFn::Or | ElementwiseFn::Not => {
                same()?;
                if !(t0.is_integer() || t0 == ElementType::Bit) {
                    return Err(bad(format!("{} needs integer or bit inputs, got {t0}", f.id())));
                }
            }
            ElementwiseFn::Eq | ElementwiseFn::Lt | ElementwiseFn::Le => {
                same()?;
                outputs[0].1 = ElementType::Bit;
            }
            ElementwiseFn::InRange { lo, hi } => {
                *lo = lo.coerce(&t0).ok_or_else(|| bad(format!("in_range bound {lo} not in {t0}")))?;
                *hi = hi.coerce(&t0).ok_or_else(|| bad(format!("in_range bound {hi} not in {t0}")))?;
                outputs[0].1 = ElementType::Bit;
            }
            ElementwiseFn::CompareConst { value, .. } => {
                *value = value.coerce(&t0).ok_or_else(|| bad(format!("constant {value} not in {t0}")))?;
                outputs[0].1 = ElementType::Bit;
            }
            ElementwiseFn::Identity => {}
            ElementwiseFn::Cast { to } => {
                to.check().map_err(|e| bad(e.to_string()))?;
                let castable = |t: &ElementType| t.is_numeric() || *t == ElementType::Bit;
                if !castable(&t0) || !castable(to) {
                    return Err(bad(format!("cannot cast {t0} to {to}")));
                }
                outputs[0].1 = to.clone();
            }
            ElementwiseFn::ClipBy { k } | ElementwiseFn::Scale { k } => {
                if !t0.is_numeric() {
                    return Err(bad(format!("{} needs a numeric input, got {t0}", f.id())));
                }
                *k = k.coerce(&t0).ok_or_else(|| bad(format!("constant {k} not in {t0}")))?;
            }
            ElementwiseFn::TupleMake { .. } => {
                outputs[0].1 = ElementType::product(types.clone()).map_err(|e| bad(e.to_string()))?;
            }
            ElementwiseFn::Carve { w, p } => {
                if !t0.is_unsigned() || !(0 < *p && *p < *w && *w <= 64) {
                    return Err(bad(format!("carve needs unsigned input and 0 < p < w <= 64, got w={w}, p={p}")));
                }
                outputs = vec![
                    ("prefixes".to_string(), ElementType::UInt(*p)),
                    ("suffixes".to_string(), ElementType::UInt(*w - *p)),
                ];
            }
        }
        let mut sig = Signature::new();
        for (l, t) in labels.into_iter().zip(&types) {
            sig = sig.with_input(l, t.clone());
        }
        for (l, t) in outputs {
            sig = sig.with_output(l, t);
        }
        Ok(Elementwise { name: "elementwise".into(), f, types, sig })
    }

    pub fn unary(f: ElementwiseFn, ty: ElementType) -> Result<Self, CatalogError> {
        Elementwise::new(f, vec![ty])
    }

    pub fn binary(f: ElementwiseFn, ty: ElementType) -> Result<Self, CatalogError> {
        Elementwise::new(f, vec![ty.clone(), ty])
    }

    pub fn function(&self) -> &ElementwiseFn {
        &self.f
    }

    /// Builds from `{"fn": id, "types": [...]}` (or `"type"` for a single/repeated type) plus fn constants.
    pub fn from_params(params: &Json) -> Result<Self, CatalogError> {
        let p = Params(params);
        let id = p.str("fn")?;
        let ty_value = |key: &str| -> Result<Value, CatalogError> {
            let v = p.get(key).ok_or_else(|| bad(format!("{id} needs `{key}`")))?;
            json_value(v)
        };
        let f = match id {
            "add" => ElementwiseFn::Add,
            "sub" => ElementwiseFn::Sub,
            "mul" => ElementwiseFn::Mul,
            "div" => ElementwiseFn::Div,
            "mod" => ElementwiseFn::Mod,
            "min" => ElementwiseFn::Min,
            "max" => ElementwiseFn::Max,
            "and" => ElementwiseFn::And,
            "or" => ElementwiseFn::Or,
            "not" => ElementwiseFn::Not,
            "eq" => ElementwiseFn::Eq,
            "lt" => ElementwiseFn::Lt,
            "le" => ElementwiseFn::Le,
            "in_range" => ElementwiseFn::InRange { lo: ty_value("lo")?, hi: ty_value("hi")? },
            "select_const_compare" => {
                ElementwiseFn::CompareConst { cmp: CmpOp::parse(p.str("cmp")?)?, value: ty_value("value")? }
            }
            "identity" => ElementwiseFn::Identity,
            "cast" => ElementwiseFn::Cast { to: p.ty("to")? },
            "clip_by" => ElementwiseFn::ClipBy { k: ty_value("k")? },
            "scale" => ElementwiseFn::Scale { k: ty_value("k")? },
            "tuple_make" => ElementwiseFn::TupleMake { k: p.u64("k")? as usize },
            "carve" => ElementwiseFn::Carve { w: p.u64("w")? as u8, p: p.u64("p")? as u8 },
            other => return Err(bad(format!("unknown elementwise function `{other}`"))),
        };
        let types = if p.get("types").is_some() { p.types("types")? } else { vec![p.ty("type")?; in_labels(&f).len()] };
        Elementwise::new(f, types)
    }
}

/// Reads a JSON constant loosely; it is coerced to the input type at construction.
fn json_value(v: &Json) -> Result<Value, CatalogError> {
    Ok(match v {
        Json::Bool(b) => Value::Bit(*b),
        Json::Number(n) => {
            if let Some(u) = n.as_u64() {
                Value::UInt(u)
            } else if let Some(i) = n.as_i64() {
                Value::Int(i)
            } else {
                Value::Float(n.as_f64().unwrap())
            }
        }
        Json::Null => Value::Unit,
        Json::Array(xs) => Value::Tuple(xs.iter().map(json_value).collect::<Result<_, _>>()?),
        _ => return Err(bad(format!("unsupported constant {v}"))),
    })
}

fn cmp_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        _ => Some(a.cmp(b)),
    }
}

fn bits(v: impl Iterator<Item = bool>) -> Column {
    Column::bits(v.collect())
}

fn cast_column(c: &Column, to: &ElementType) -> Result<Column, OpError> {
    let from = c.element_type();
    if from == to {
        return Ok(c.clone());
    }
    match (numeric(c).unwrap(), to) {
        (Num::I(v), ElementType::Float(_)) => {
            let out: Vec<f64> = v.iter().map(|x| round_to(to, *x as f64)).collect();
            if let Some(i) = v.iter().zip(&out).position(|(x, y)| *y as i128 != *x) {
                return Err(OpError::Overflow(format!("{} at {i} is not exact in {to}", v[i])));
            }
            Ok(Column::from_f64s(to.clone(), out)?)
        }
        (Num::I(v), _) => int_result(to, v, "cast"),
        (Num::F(v), ElementType::Float(_)) => {
            if let Some(i) = v.iter().position(|x| round_to(to, *x).to_bits() != x.to_bits()) {
                return Err(OpError::Overflow(format!("{} at {i} is not exact in {to}", v[i])));
            }
            Ok(Column::from_f64s(to.clone(), v)?)
        }
        (Num::F(v), _) => {
            let mut out = Vec::with_capacity(v.len());
            for (i, x) in v.iter().enumerate() {
                if x.fract() != 0.0 || !x.is_finite() || x.abs() > 1.8e19 {
                    return Err(OpError::Overflow(format!("{x} at {i} is not an integer of {to}")));
                }
                out.push(*x as i128);
            }
            int_result(to, out, "cast")
        }
    }
}

impl Elementwise {
    fn eval(&self, args: &[&Column]) -> Result<Vec<(String, Column)>, OpError> {
        let t0 = &self.types[0];
        let n = args[0].len();
        if let Some(c) = args.iter().find(|c| c.len() != n) {
            return Err(OpError::LengthMismatch(format!("{}: {} vs {}", self.f.id(), n, c.len())));
        }
        let out_ty = self.sig.outputs.values().next().unwrap().clone();
        let result = |c: Column| Ok(vec![("result".to_string(), c)]);
        let arith =
            |op: &dyn Fn(i128, i128) -> Option<i128>, fop: &dyn Fn(f64, f64) -> f64| -> Result<Column, OpError> {
                match (numeric(args[0]).unwrap(), numeric(args[1]).unwrap()) {
                    (Num::I(a), Num::I(b)) => {
                        let mut out = Vec::with_capacity(n);
                        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                            out.push(op(*x, *y).ok_or_else(|| {
                                OpError::Precondition(format!("{} undefined for ({x}, {y}) at {i}", self.f.id()))
                            })?);
                        }
                        int_result(t0, out, self.f.id())
                    }
                    (Num::F(a), Num::F(b)) => Ok(Column::from_f64s(
                        t0.clone(),
                        a.iter().zip(&b).map(|(x, y)| round_to(t0, fop(*x, *y))).collect(),
                    )?),
                    _ => unreachable!("types checked at construction"),
                }
            };
        match &self.f {
            ElementwiseFn::Add => result(arith(&|a, b| Some(a + b), &|a, b| a + b)?),
            ElementwiseFn::Sub => result(arith(&|a, b| Some(a - b), &|a, b| a - b)?),
            ElementwiseFn::Mul => result(arith(&|a, b| a.checked_mul(b), &|a, b| a * b)?),
            ElementwiseFn::Div => result(arith(&|a, b| (b != 0).then(|| a / b), &|a, b| a / b)?),
            ElementwiseFn::Mod => result(arith(&|a, b| (b != 0).then(|| a % b), &|a, b| a % b)?),
            ElementwiseFn::Min => result(arith(&|a, b| Some(a.min(b)), &|a, b| a.min(b))?),
            ElementwiseFn::Max => result(arith(&|a, b| Some(a.max(b)), &|a, b| a.max(b))?),
            ElementwiseFn::And | ElementwiseFn::Or => {
                let and = self.f == ElementwiseFn::And;
                let (a, b) = (args[0].to_i128s().unwrap(), args[1].to_i128s().unwrap());
                let v = a.iter().zip(&b).map(|(x, y)| if and { x & y } else { x | y }).collect();
                result(int_result(t0, v, self.f.id())?)
            }
            ElementwiseFn::Not => {
                let a = args[0].to_i128s().unwrap();
                let v = match t0 {
                    ElementType::Bit => a.iter().map(|x| 1 - x).collect(),
                    ElementType::UInt(_) => {
                        let hi = t0.int_range().unwrap().1;
                        a.iter().map(|x| hi - x).collect()
                    }
                    _ => a.iter().map(|x| !x).collect(),
                };
                result(int_result(t0, v, "not")?)
            }
            ElementwiseFn::Eq | ElementwiseFn::Lt | ElementwiseFn::Le => {
                let cmp = match self.f {
                    ElementwiseFn::Eq => CmpOp::Eq,
                    ElementwiseFn::Lt => CmpOp::Lt,
                    _ => CmpOp::Le,
                };
                if let (Some(a), Some(b)) = (args[0].to_i128s(), args[1].to_i128s()) {
                    return result(bits(a.iter().zip(&b).map(|(x, y)| cmp.holds(Some(x.cmp(y))))));
                }
                result(bits((0..n).map(|i| cmp.holds(cmp_values(&args[0].value(i), &args[1].value(i))))))
            }
            ElementwiseFn::InRange { lo, hi } => result(bits((0..n).map(|i| {
                let x = args[0].value(i);
                CmpOp::Ge.holds(cmp_values(&x, lo)) && CmpOp::Le.holds(cmp_values(&x, hi))
            }))),
            ElementwiseFn::CompareConst { cmp, value } => {
                if let (Some(a), Some(v)) = (args[0].to_i128s(), value.as_i128()) {
                    return result(bits(a.iter().map(|x| cmp.holds(Some(x.cmp(&v))))));
                }
                result(bits((0..n).map(|i| cmp.holds(cmp_values(&args[0].value(i), value)))))
            }
            ElementwiseFn::Identity => result(args[0].clone()),
            ElementwiseFn::Cast { to } => result(cast_column(args[0], to)?),
            ElementwiseFn::ClipBy { k } | ElementwiseFn::Scale { k } => {
                let clip = matches!(self.f, ElementwiseFn::ClipBy { .. });
                match numeric(args[0]).unwrap() {
                    Num::I(a) => {
                        let k = k.as_i128().unwrap();
                        let v = a.iter().map(|x| if clip { *x.min(&k) } else { x * k }).collect();
                        result(int_result(t0, v, self.f.id())?)
                    }
                    Num::F(a) => {
                        let k = k.as_f64().unwrap();
                        let v = a.iter().map(|x| round_to(t0, if clip { x.min(k) } else { x * k })).collect();
                        result(Column::from_f64s(t0.clone(), v)?)
                    }
                }
            }
            ElementwiseFn::TupleMake { .. } => {
                let z = Column::zip(args.iter().map(|c| (*c).clone()).collect())?;
                debug_assert_eq!(z.element_type(), &out_ty);
                result(z)
            }
            ElementwiseFn::Carve { w, p } => {
                let v = args[0].as_u64().unwrap();
                let low = (*w - *p) as u32;
                if *w < 64 {
                    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| **x >> *w != 0) {
                        return Err(OpError::OutOfRange(format!("value {x} at {i} exceeds {w} bits")));
                    }
                }
                let pre = Column::from_u64s(ElementType::UInt(*p), v.iter().map(|x| x >> low).collect())?;
                let suf =
                    Column::from_u64s(ElementType::UInt(*w - *p), v.iter().map(|x| x & ((1u64 << low) - 1)).collect())?;
                Ok(vec![("prefixes".into(), pre), ("suffixes".into(), suf)])
            }
        }
    }
}

impl Operator for Elementwise {
    fn name(&self) -> &str {
        &self.name
    }
    fn params(&self) -> Json {
        let mut j = json!({"fn": self.f.id(), "types": self.types.iter().map(ty_json).collect::<Vec<_>>()});
        let m = j.as_object_mut().unwrap();
        match &self.f {
            ElementwiseFn::InRange { lo, hi } => {
                m.insert("lo".into(), lo.to_json());
                m.insert("hi".into(), hi.to_json());
            }
            ElementwiseFn::CompareConst { cmp, value } => {
                m.insert("cmp".into(), json!(cmp.as_str()));
                m.insert("value".into(), value.to_json());
            }
            ElementwiseFn::Cast { to } => {
                m.insert("to".into(), ty_json(to));
            }
            ElementwiseFn::ClipBy { k } | ElementwiseFn::Scale { k } => {
                m.insert("k".into(), k.to_json());
            }
            ElementwiseFn::TupleMake { k } => {
                m.insert("k".into(), json!(k));
            }
            ElementwiseFn::Carve { w, p } => {
                m.insert("w".into(), json!(w));
                m.insert("p".into(), json!(p));
            }
            _ => {}
        }
        j
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let labels = in_labels(&self.f);
        let args = labels.iter().map(|l| port(inputs, l)).collect::<Result<Vec<_>, _>>()?;
        Ok(self.eval(&args)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::ElementType as T;

    fn run(op: &Elementwise, args: &[(&str, Column)]) -> Result<Ports, OpError> {
        op.apply(&args.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
    }

    fn u(v: &[u64]) -> Column {
        Column::u64s(v.to_vec())
    }

    #[test]
    fn worked_examples() {
        let and = Elementwise::binary(ElementwiseFn::And, T::Bit).unwrap();
        let r =
            run(&and, &[("lhs", Column::bools(&[true, false, true])), ("rhs", Column::bools(&[true, true, false]))]);
        assert_eq!(r.unwrap()["result"], Column::bools(&[true, false, false]));
        let add = Elementwise::binary(ElementwiseFn::Add, T::U64).unwrap();
        assert_eq!(run(&add, &[("lhs", u(&[1, 2])), ("rhs", u(&[10, 20]))]).unwrap()["result"], u(&[11, 22]));
        let rng =
            Elementwise::unary(ElementwiseFn::InRange { lo: Value::UInt(3), hi: Value::UInt(8) }, T::U64).unwrap();
        assert_eq!(run(&rng, &[("arg", u(&[5, 9, 2]))]).unwrap()["result"], Column::bools(&[true, false, false]));
    }

    #[test]
    fn checked_arithmetic() {
        let add = Elementwise::binary(ElementwiseFn::Add, T::U8).unwrap();
        let a = Column::from_u64s(T::U8, vec![200]).unwrap();
        assert!(run(&add, &[("lhs", a.clone()), ("rhs", a.clone())]).is_err());
        let sub = Elementwise::binary(ElementwiseFn::Sub, T::U8).unwrap();
        let b = Column::from_u64s(T::U8, vec![201]).unwrap();
        assert!(run(&sub, &[("lhs", a.clone()), ("rhs", b)]).is_err());
        let div = Elementwise::binary(ElementwiseFn::Div, T::U8).unwrap();
        let z = Column::from_u64s(T::U8, vec![0]).unwrap();
        assert!(run(&div, &[("lhs", a), ("rhs", z)]).is_err());
    }

    #[test]
    fn casts() {
        let c = Elementwise::unary(ElementwiseFn::Cast { to: T::U8 }, T::U64).unwrap();
        assert!(run(&c, &[("arg", u(&[255]))]).is_ok());
        assert!(run(&c, &[("arg", u(&[256]))]).is_err());
        let s = Elementwise::unary(ElementwiseFn::Cast { to: T::I16 }, T::I8).unwrap();
        let r = run(&s, &[("arg", Column::from_i64s(T::I8, vec![-3]).unwrap())]).unwrap();
        assert_eq!(r["result"], Column::from_i64s(T::I16, vec![-3]).unwrap());
    }

    #[test]
    fn clip_scale_tuple_carve() {
        let clip = Elementwise::unary(ElementwiseFn::ClipBy { k: Value::UInt(4) }, T::U64).unwrap();
        assert_eq!(run(&clip, &[("arg", u(&[1, 9]))]).unwrap()["result"], u(&[1, 4]));
        let scale = Elementwise::unary(ElementwiseFn::Scale { k: Value::UInt(3) }, T::U64).unwrap();
        assert_eq!(run(&scale, &[("arg", u(&[1, 9]))]).unwrap()["result"], u(&[3, 27]));
        let tm = Elementwise::new(ElementwiseFn::TupleMake { k: 2 }, vec![T::U64, T::Bit]).unwrap();
        let r = run(&tm, &[("arg_1", u(&[1])), ("arg_2", Column::bools(&[true]))]).unwrap();
        assert_eq!(r["result"].element_type().to_string(), "(u64,bit)");
        let carve = Elementwise::unary(ElementwiseFn::Carve { w: 8, p: 3 }, T::U64).unwrap();
        let r = run(&carve, &[("arg", u(&[181]))]).unwrap();
        assert_eq!(r["prefixes"].value(0), Value::UInt(5));
        assert_eq!(r["suffixes"].value(0), Value::UInt(21));
    }

    #[test]
    fn params_roundtrip() {
        let op =
            Elementwise::unary(ElementwiseFn::CompareConst { cmp: CmpOp::Lt, value: Value::UInt(24) }, T::U32).unwrap();
        let again = Elementwise::from_params(&op.params()).unwrap();
        assert_eq!(again.params(), op.params());
        assert_eq!(again.function(), op.function());
    }
}
