use serde_json::{json, Value as Json};

use super::{index_of, one, port, same_len, scalar_usize, ty_json, CatalogError, OpError, Operator, Ports};
use crate::circuit::Signature;
use crate::column::{Bits, Column, ElementType, Value};

pub(crate) fn need_int(t: &ElementType, what: &str) -> Result<(), CatalogError> {
    if t.is_integer() {
        Ok(())
    } else {
        Err(CatalogError::BadParams(format!("{what} must be an integer type, got {t}")))
    }
}

/// Builds an integer column of type `ty` from counts, failing if one does not fit.
pub(crate) fn int_column(ty: &ElementType, vals: impl IntoIterator<Item = usize>) -> Result<Column, OpError> {
    let v: Vec<i128> = vals.into_iter().map(|x| x as i128).collect();
    Column::from_i128(ty.clone(), v).map_err(|e| OpError::Overflow(e.to_string()))
}

/// Identity relay.
#[derive(Debug)]
pub struct NoOp {
    ty: ElementType,
    sig: Signature,
}

impl NoOp {
    pub fn new(ty: ElementType) -> Self {
        let sig = Signature::new().with_input("arg", ty.clone()).with_output("result", ty.clone());
        NoOp { ty, sig }
    }
}

impl Operator for NoOp {
    fn name(&self) -> &str {
        "noop"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        Ok(one("result", port(inputs, "arg")?.clone()))
    }
}

/// A constant length-1 column.
#[derive(Debug)]
pub struct Scalar {
    value: Column,
    sig: Signature,
}

impl Scalar {
    pub fn new(ty: ElementType, value: Value) -> Result<Self, CatalogError> {
        let value = Column::scalar(ty.clone(), value).map_err(|e| CatalogError::BadParams(e.to_string()))?;
        Ok(Scalar { value, sig: Signature::new().with_output("result", ty) })
    }
}

impl Operator for Scalar {
    fn name(&self) -> &str {
        "scalar"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(self.value.element_type()), "value": self.value.value(0).to_json()})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, _: &Ports) -> Result<Ports, OpError> {
        Ok(one("result", self.value.clone()))
    }
}

#[derive(Debug)]
pub struct Replicate {
    ty: ElementType,
    factor_ty: ElementType,
    sig: Signature,
}

impl Replicate {
    pub fn new(ty: ElementType, factor_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&factor_ty, "factor type")?;
        let sig = Signature::new()
            .with_input("value", ty.clone())
            .with_input("factor", factor_ty.clone())
            .with_output("replicated", ty.clone());
        Ok(Replicate { ty, factor_ty, sig })
    }
}

impl Operator for Replicate {
    fn name(&self) -> &str {
        "replicate"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "factor_type": ty_json(&self.factor_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let v = port(inputs, "value")?;
        if v.len() != 1 {
            return Err(OpError::NotScalar("value".into()));
        }
        let n = scalar_usize(inputs, "factor")?;
        Ok(one("replicated", v.take(&vec![0; n])))
    }
}

/// Keeps the elements whose selection bit is set, in their original order.
#[derive(Debug)]
pub struct Select {
    ty: ElementType,
    relaxed: bool,
    sig: Signature,
}

impl Select {
    pub fn new(ty: ElementType, relaxed: bool) -> Self {
        let sig = Signature::new()
            .with_input("data", ty.clone())
            .with_input("selection", ElementType::Bit)
            .with_output("selected", ty.clone());
        Select { ty, relaxed, sig }
    }
}

impl Operator for Select {
    fn name(&self) -> &str {
        "select"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "relaxed": self.relaxed})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let data = port(inputs, "data")?;
        let sel = port(inputs, "selection")?;
        same_len(data, sel, "select")?;
        let mut idx = sel.as_bits().unwrap().ones();
        if self.relaxed {
            // Any order is allowed; reversing makes that visible to callers relying on it.
            idx.reverse();
        }
        Ok(one("selected", data.take(&idx)))
    }
}

#[derive(Debug)]
pub struct Iota {
    ty: ElementType,
    sig: Signature,
}

impl Iota {
    pub fn new(ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&ty, "iota type")?;
        let sig = Signature::new().with_input("length", ty.clone()).with_output("iota", ty.clone());
        Ok(Iota { ty, sig })
    }
}

impl Operator for Iota {
    fn name(&self) -> &str {
        "iota"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let n = scalar_usize(inputs, "length")?;
        Ok(one("iota", int_column(&self.ty, 0..n)?))
    }
}

/// `permuted[permutation[i]] = data[i]`.
#[derive(Debug)]
pub struct Permute {
    ty: ElementType,
    index_ty: ElementType,
    sig: Signature,
}

impl Permute {
    pub fn new(ty: ElementType, index_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&index_ty, "index type")?;
        let sig = Signature::new()
            .with_input("permutation", index_ty.clone())
            .with_input("data", ty.clone())
            .with_output("permuted", ty.clone());
        Ok(Permute { ty, index_ty, sig })
    }
}

/// Inverse of a permutation given as target positions, or an error if it is not one.
pub(crate) fn invert_permutation(p: &[usize]) -> Result<Vec<usize>, OpError> {
    let n = p.len();
    let mut inv = vec![usize::MAX; n];
    for (i, &t) in p.iter().enumerate() {
        if t >= n {
            return Err(OpError::OutOfRange(format!("permutation target {t} >= {n}")));
        }
        if inv[t] != usize::MAX {
            return Err(OpError::Precondition(format!("not a permutation: {t} appears twice")));
        }
        inv[t] = i;
    }
    Ok(inv)
}

impl Operator for Permute {
    fn name(&self) -> &str {
        "permute"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let p = port(inputs, "permutation")?;
        let data = port(inputs, "data")?;
        same_len(p, data, "permute")?;
        let inv = invert_permutation(&index_of(p, "permutation")?)?;
        Ok(one("permuted", data.take(&inv)))
    }
}

#[derive(Debug)]
pub struct Length {
    ty: ElementType,
    out_ty: ElementType,
    sig: Signature,
}

impl Length {
    pub fn new(ty: ElementType, out_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&out_ty, "length type")?;
        let sig = Signature::new().with_input("col", ty.clone()).with_output("length", out_ty.clone());
        Ok(Length { ty, out_ty, sig })
    }
}

impl Operator for Length {
    fn name(&self) -> &str {
        "length"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "out_type": ty_json(&self.out_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let n = port(inputs, "col")?.len();
        Ok(one("length", int_column(&self.out_ty, [n])?))
    }
}

#[derive(Debug)]
pub struct Concatenate {
    ty: ElementType,
    k: usize,
    sig: Signature,
}

impl Concatenate {
    pub fn new(ty: ElementType, k: usize) -> Result<Self, CatalogError> {
        if k == 0 {
            return Err(CatalogError::BadParams("concatenate needs k >= 1".into()));
        }
        let mut sig = Signature::new().with_output("result", ty.clone());
        for i in 1..=k {
            sig = sig.with_input(format!("col_{i}"), ty.clone());
        }
        Ok(Concatenate { ty, k, sig })
    }
}

impl Operator for Concatenate {
    fn name(&self) -> &str {
        "concatenate"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "k": self.k})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let cols = (1..=self.k).map(|i| port(inputs, &format!("col_{i}"))).collect::<Result<Vec<_>, _>>()?;
        Ok(one("result", Column::concat(&cols, &self.ty)?))
    }
}

/// Copy of `col` with `result[pos[j]] = data[j]`; positions must be distinct.
#[derive(Debug)]
pub struct Scatter {
    ty: ElementType,
    index_ty: ElementType,
    sig: Signature,
}

impl Scatter {
    pub fn new(ty: ElementType, index_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&index_ty, "index type")?;
        let sig = Signature::new()
            .with_input("col", ty.clone())
            .with_input("pos", index_ty.clone())
            .with_input("data", ty.clone())
            .with_output("result", ty.clone());
        Ok(Scatter { ty, index_ty, sig })
    }
}

pub(crate) fn check_positions(pos: &[usize], n: usize) -> Result<(), OpError> {
    let mut seen = Bits::zeros(n);
    for &p in pos {
        if p >= n {
            return Err(OpError::OutOfRange(format!("position {p} >= {n}")));
        }
        if seen.get(p) {
            return Err(OpError::Precondition(format!("duplicate position {p}")));
        }
        seen.set(p, true);
    }
    Ok(())
}

impl Operator for Scatter {
    fn name(&self) -> &str {
        "scatter"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let col = port(inputs, "col")?;
        let pos = port(inputs, "pos")?;
        let data = port(inputs, "data")?;
        same_len(pos, data, "scatter pos/data")?;
        let p = index_of(pos, "pos")?;
        check_positions(&p, col.len())?;
        Ok(one("result", col.scatter(&p, data)))
    }
}

#[derive(Debug)]
pub struct Gather {
    ty: ElementType,
    index_ty: ElementType,
    sig: Signature,
}

impl Gather {
    pub fn new(ty: ElementType, index_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&index_ty, "index type")?;
        let sig = Signature::new()
            .with_input("pos", index_ty.clone())
            .with_input("data", ty.clone())
            .with_output("result", ty.clone());
        Ok(Gather { ty, index_ty, sig })
    }
}

impl Operator for Gather {
    fn name(&self) -> &str {
        "gather"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let pos = port(inputs, "pos")?;
        let data = port(inputs, "data")?;
        let p = index_of(pos, "pos")?;
        if let Some(bad) = p.iter().find(|x| **x >= data.len()) {
            return Err(OpError::OutOfRange(format!("gather position {bad} >= {}", data.len())));
        }
        Ok(one("result", data.take(&p)))
    }
}

/// Indices of the set bits, increasing.
#[derive(Debug)]
pub struct SelectIndices {
    ty: ElementType,
    sig: Signature,
}

impl SelectIndices {
    pub fn new(ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&ty, "index type")?;
        let sig = Signature::new().with_input("characteristic", ElementType::Bit).with_output("indices", ty.clone());
        Ok(SelectIndices { ty, sig })
    }
}

impl Operator for SelectIndices {
    fn name(&self) -> &str {
        "select_indices"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "characteristic")?;
        Ok(one("indices", int_column(&self.ty, c.as_bits().unwrap().ones())?))
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
    fn replicate_examples() {
        let op = Replicate::new(T::U64, T::U64).unwrap();
        let r = op.apply(&ports(&[("value", u(&[7])), ("factor", u(&[3]))])).unwrap();
        assert_eq!(r["replicated"], u(&[7, 7, 7]));
        let r = op.apply(&ports(&[("value", u(&[7])), ("factor", u(&[0]))])).unwrap();
        assert!(r["replicated"].is_empty());
        let signed = Replicate::new(T::U64, T::I64).unwrap();
        assert!(signed.apply(&ports(&[("value", u(&[7])), ("factor", Column::i64s(vec![-1]))])).is_err());
    }

    #[test]
    fn select_examples() {
        let op = Select::new(T::U64, false);
        let r = op.apply(&ports(&[("data", u(&[1, 2, 3])), ("selection", Column::bools(&[true, false, true]))]));
        assert_eq!(r.unwrap()["selected"], u(&[1, 3]));
        let r = op.apply(&ports(&[("data", u(&[1, 2])), ("selection", Column::bools(&[true]))]));
        assert!(r.is_err());
    }

    #[test]
    fn iota_and_length() {
        let r = Iota::new(T::U64).unwrap().apply(&ports(&[("length", u(&[4]))])).unwrap();
        assert_eq!(r["iota"], u(&[0, 1, 2, 3]));
        let r = Length::new(T::U64, T::U64).unwrap().apply(&ports(&[("col", u(&[]))])).unwrap();
        assert_eq!(r["length"], u(&[0]));
        let narrow = Iota::new(T::U8).unwrap();
        assert!(narrow.apply(&ports(&[("length", Column::from_u64s(T::U8, vec![255]).unwrap())])).is_ok());
    }

    #[test]
    fn permute_examples() {
        let op = Permute::new(T::U64, T::U64).unwrap();
        let r = op.apply(&ports(&[("permutation", u(&[1, 2, 0])), ("data", u(&[10, 11, 12]))])).unwrap();
        assert_eq!(r["permuted"], u(&[12, 10, 11]));
        assert!(op.apply(&ports(&[("permutation", u(&[0, 0, 1])), ("data", u(&[1, 2, 3]))])).is_err());
    }

    #[test]
    fn scatter_gather_examples() {
        let s = Scatter::new(T::U64, T::U64).unwrap();
        let r = s.apply(&ports(&[("col", u(&[9, 9, 9])), ("pos", u(&[0, 2])), ("data", u(&[1, 2]))])).unwrap();
        assert_eq!(r["result"], u(&[1, 9, 2]));
        assert!(s.apply(&ports(&[("col", u(&[9, 9])), ("pos", u(&[5])), ("data", u(&[1]))])).is_err());
        assert!(s.apply(&ports(&[("col", u(&[9, 9])), ("pos", u(&[1, 1])), ("data", u(&[1, 2]))])).is_err());
        let g = Gather::new(T::U64, T::U64).unwrap();
        let r = g.apply(&ports(&[("pos", u(&[2, 0])), ("data", u(&[5, 6, 7]))])).unwrap();
        assert_eq!(r["result"], u(&[7, 5]));
        assert!(g.apply(&ports(&[("pos", u(&[3])), ("data", u(&[5, 6, 7]))])).is_err());
    }

    #[test]
    fn select_indices_examples() {
        let op = SelectIndices::new(T::U64).unwrap();
        let r = op.apply(&ports(&[("characteristic", Column::bools(&[true, false, true]))])).unwrap();
        assert_eq!(r["indices"], u(&[0, 2]));
        let r = op.apply(&ports(&[("characteristic", Column::bools(&[false, true]))])).unwrap();
        assert_eq!(r["indices"], u(&[1]));
    }

    #[test]
    fn concatenate_examples() {
        let op = Concatenate::new(T::U64, 2).unwrap();
        let r = op.apply(&ports(&[("col_1", u(&[1])), ("col_2", u(&[2, 3]))])).unwrap();
        assert_eq!(r["result"], u(&[1, 2, 3]));
    }
}
