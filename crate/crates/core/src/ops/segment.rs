use serde_json::{json, Value as Json};

use super::structural::{int_column, need_int};
use super::{one, port, scalar_usize, ty_json, CatalogError, OpError, Operator, Ports};
use crate::circuit::Signature;
use crate::column::{Column, ElementType};

fn full_segments(n: usize, l: usize) -> Result<usize, OpError> {
    if l == 0 {
        return if n == 0 {
            Ok(0)
        } else {
            Err(OpError::Precondition("segment length 0 on a non-empty column".into()))
        };
    }
    if n % l != 0 {
        return Err(OpError::Precondition(format!("segment length {l} leaves a slack segment in length {n}")));
    }
    Ok(n / l)
}

/// Swaps the roles of segment index and in-segment offset of a full segmented view.
#[derive(Debug)]
pub struct Transpose {
    ty: ElementType,
    index_ty: ElementType,
    sig: Signature,
}

impl Transpose {
    pub fn new(ty: ElementType, index_ty: ElementType) -> Result<Self, CatalogError> {
        need_int(&index_ty, "index type")?;
        let sig = Signature::new()
            .with_input("segment_length", index_ty.clone())
            .with_input("col", ty.clone())
            .with_output("transposed", ty.clone())
            .with_output("transposed_segment_length", index_ty.clone());
        Ok(Transpose { ty, index_ty, sig })
    }
}

impl Operator for Transpose {
    fn name(&self) -> &str {
        "transpose"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let col = port(inputs, "col")?;
        let l = scalar_usize(inputs, "segment_length")?;
        let m = full_segments(col.len(), l)?;
        let idx: Vec<usize> = (0..l).flat_map(|j| (0..m).map(move |i| i * l + j)).collect();
        let mut out = one("transposed", col.take(&idx));
        out.insert("transposed_segment_length".into(), int_column(&self.index_ty, [m])?);
        Ok(out)
    }
}

macro_rules! replicating_op {
    ($name:ident, $id:literal, $doc:literal, $idx:expr, $new_len:expr) => {
        #[doc = $doc]
        #[derive(Debug)]
        pub struct $name {
            ty: ElementType,
            index_ty: ElementType,
            sig: Signature,
        }

        impl $name {
            pub fn new(ty: ElementType, index_ty: ElementType) -> Result<Self, CatalogError> {
                need_int(&index_ty, "index type")?;
                let sig = Signature::new()
                    .with_input("col", ty.clone())
                    .with_input("segment_length", index_ty.clone())
                    .with_input("factor", index_ty.clone())
                    .with_output("replicated", ty.clone())
                    .with_output("replicated_segment_length", index_ty.clone());
                Ok($name { ty, index_ty, sig })
            }
        }

        impl Operator for $name {
            fn name(&self) -> &str {
                $id
            }
            fn params(&self) -> Json {
                json!({"type": ty_json(&self.ty), "index_type": ty_json(&self.index_ty)})
            }
            fn signature(&self) -> &Signature {
                &self.sig
            }
            fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
                let col = port(inputs, "col")?;
                let l = scalar_usize(inputs, "segment_length")?;
                let f = scalar_usize(inputs, "factor")?;
                let m = full_segments(col.len(), l)?;
                if col.len().checked_mul(f).is_none_or(|t| t > 1 << 40) {
                    return Err(OpError::Overflow("replicated length too large".into()));
                }
                let idx: Vec<usize> = $idx(m, l, f);
                let mut out = one("replicated", col.take(&idx));
                out.insert("replicated_segment_length".into(), int_column(&self.index_ty, [$new_len(l, f)])?);
                Ok(out)
            }
        }
    };
}

replicating_op!(
    ReplicateSegments,
    "replicate_segments",
    "Repeats each segment `factor` times consecutively.",
    |m: usize, l: usize, f: usize| (0..m).flat_map(|s| (0..f).flat_map(move |_| s * l..s * l + l)).collect(),
    |l: usize, _f: usize| l
);

replicating_op!(
    ReplicateWithinSegments,
    "replicate_within_segments",
    "Repeats each element `factor` times in place; segments grow to `segment_length·factor`.",
    |m: usize, l: usize, f: usize| (0..m * l).flat_map(|i| std::iter::repeat_n(i, f)).collect(),
    |l: usize, f: usize| l * f
);

fn component_labels(k: usize) -> impl Iterator<Item = String> {
    (1..=k).map(|i| format!("component_{i}"))
}

#[derive(Debug)]
pub struct Zip {
    types: Vec<ElementType>,
    sig: Signature,
}

impl Zip {
    pub fn new(types: Vec<ElementType>) -> Result<Self, CatalogError> {
        let product = ElementType::product(types.clone()).map_err(|e| CatalogError::BadParams(e.to_string()))?;
        if types.is_empty() {
            return Err(CatalogError::BadParams("zip needs at least one component".into()));
        }
        let mut sig = Signature::new().with_output("zipped", product);
        for (l, t) in component_labels(types.len()).zip(&types) {
            sig = sig.with_input(l, t.clone());
        }
        Ok(Zip { types, sig })
    }
}

impl Operator for Zip {
    fn name(&self) -> &str {
        "zip"
    }
    fn params(&self) -> Json {
        json!({"types": self.types.iter().map(ty_json).collect::<Vec<_>>()})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let comps =
            component_labels(self.types.len()).map(|l| port(inputs, &l).cloned()).collect::<Result<Vec<_>, _>>()?;
        let z = Column::zip(comps).map_err(|e| OpError::LengthMismatch(e.to_string()))?;
        Ok(one("zipped", z))
    }
}

#[derive(Debug)]
pub struct Unzip {
    types: Vec<ElementType>,
    sig: Signature,
}

impl Unzip {
    pub fn new(types: Vec<ElementType>) -> Result<Self, CatalogError> {
        let product = ElementType::product(types.clone()).map_err(|e| CatalogError::BadParams(e.to_string()))?;
        if types.is_empty() {
            return Err(CatalogError::BadParams("unzip needs at least one component".into()));
        }
        let mut sig = Signature::new().with_input("zipped", product);
        for (l, t) in component_labels(types.len()).zip(&types) {
            sig = sig.with_output(l, t.clone());
        }
        Ok(Unzip { types, sig })
    }
}

impl Operator for Unzip {
    fn name(&self) -> &str {
        "unzip"
    }
    fn params(&self) -> Json {
        json!({"types": self.types.iter().map(ty_json).collect::<Vec<_>>()})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let z = port(inputs, "zipped")?;
        Ok(component_labels(self.types.len()).zip(z.components().unwrap().iter().cloned()).collect())
    }
}

fn tuple_sig(ty: &ElementType, k: usize, index_ty: &ElementType) -> Result<Signature, CatalogError> {
    need_int(index_ty, "index type")?;
    if k == 0 {
        return Err(CatalogError::BadParams("k must be positive".into()));
    }
    let product = ElementType::product(vec![ty.clone(); k]).map_err(|e| CatalogError::BadParams(e.to_string()))?;
    Ok(Signature::new()
        .with_input("segment_length", index_ty.clone())
        .with_input("components", ty.clone())
        .with_output("composed", product))
}

/// Zips the `k` segments of length `segment_length` elementwise.
#[derive(Debug)]
pub struct ComposeSegments {
    ty: ElementType,
    k: usize,
    index_ty: ElementType,
    sig: Signature,
}

impl ComposeSegments {
    pub fn new(ty: ElementType, k: usize, index_ty: ElementType) -> Result<Self, CatalogError> {
        let sig = tuple_sig(&ty, k, &index_ty)?;
        Ok(ComposeSegments { ty, k, index_ty, sig })
    }
}

impl Operator for ComposeSegments {
    fn name(&self) -> &str {
        "compose_segments"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "k": self.k, "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "components")?;
        let l = scalar_usize(inputs, "segment_length")?;
        if l.checked_mul(self.k) != Some(c.len()) {
            return Err(OpError::Precondition(format!(
                "{} components of length {l} do not make up length {}",
                self.k,
                c.len()
            )));
        }
        let parts = (0..self.k).map(|j| c.slice(j * l, (j + 1) * l)).collect();
        Ok(one("composed", Column::zip(parts)?))
    }
}

/// Turns each run of `k` consecutive elements into one `k`-tuple.
#[derive(Debug)]
pub struct Assemble {
    ty: ElementType,
    k: usize,
    index_ty: ElementType,
    sig: Signature,
}

impl Assemble {
    pub fn new(ty: ElementType, k: usize, index_ty: ElementType) -> Result<Self, CatalogError> {
        let sig = tuple_sig(&ty, k, &index_ty)?;
        Ok(Assemble { ty, k, index_ty, sig })
    }
}

impl Operator for Assemble {
    fn name(&self) -> &str {
        "assemble"
    }
    fn params(&self) -> Json {
        json!({"type": ty_json(&self.ty), "k": self.k, "index_type": ty_json(&self.index_ty)})
    }
    fn signature(&self) -> &Signature {
        &self.sig
    }
    fn apply(&self, inputs: &Ports) -> Result<Ports, OpError> {
        let c = port(inputs, "components")?;
        let l = scalar_usize(inputs, "segment_length")?;
        if l != self.k {
            return Err(OpError::Precondition(format!("segment length {l} differs from k = {}", self.k)));
        }
        let m = full_segments(c.len(), l)?;
        let parts = (0..self.k).map(|j| c.take(&(0..m).map(|i| i * l + j).collect::<Vec<_>>())).collect();
        Ok(one("composed", Column::zip(parts)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::{ElementType as T, Value};

    fn ports(items: &[(&str, Column)]) -> Ports {
        items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn u(v: &[u64]) -> Column {
        Column::u64s(v.to_vec())
    }

    #[test]
    fn transpose_examples() {
        let op = Transpose::new(T::U64, T::U64).unwrap();
        let r = op.apply(&ports(&[("segment_length", u(&[3])), ("col", u(&[0, 1, 2, 3, 4, 5]))])).unwrap();
        assert_eq!(r["transposed"], u(&[0, 3, 1, 4, 2, 5]));
        assert_eq!(r["transposed_segment_length"], u(&[2]));
        let r = op.apply(&ports(&[("segment_length", u(&[1])), ("col", u(&[4, 5]))])).unwrap();
        assert_eq!(r["transposed"], u(&[4, 5]));
        assert_eq!(r["transposed_segment_length"], u(&[2]));
        assert!(op.apply(&ports(&[("segment_length", u(&[3])), ("col", u(&[0; 7]))])).is_err());
    }

    #[test]
    fn replication() {
        let rs = ReplicateSegments::new(T::U64, T::U64).unwrap();
        let args = |f| ports(&[("col", u(&[1, 2, 3, 4])), ("segment_length", u(&[2])), ("factor", u(&[f]))]);
        assert_eq!(rs.apply(&args(2)).unwrap()["replicated"], u(&[1, 2, 1, 2, 3, 4, 3, 4]));
        assert_eq!(rs.apply(&args(1)).unwrap()["replicated"], u(&[1, 2, 3, 4]));
        assert!(rs.apply(&args(0)).unwrap()["replicated"].is_empty());
        let rw = ReplicateWithinSegments::new(T::U64, T::U64).unwrap();
        let r = rw.apply(&args(2)).unwrap();
        assert_eq!(r["replicated"], u(&[1, 1, 2, 2, 3, 3, 4, 4]));
        assert_eq!(r["replicated_segment_length"], u(&[4]));
    }

    #[test]
    fn zip_compose_assemble() {
        let z = Zip::new(vec![T::U64, T::Bit]).unwrap();
        let r =
            z.apply(&ports(&[("component_1", u(&[1, 2])), ("component_2", Column::bools(&[true, false]))])).unwrap();
        assert_eq!(r["zipped"].value(0), Value::Tuple(vec![Value::UInt(1), Value::Bit(true)]));
        let back = Unzip::new(vec![T::U64, T::Bit]).unwrap().apply(&ports(&[("zipped", r["zipped"].clone())])).unwrap();
        assert_eq!(back["component_1"], u(&[1, 2]));

        let cs = ComposeSegments::new(T::U64, 2, T::U64).unwrap();
        let r = cs.apply(&ports(&[("segment_length", u(&[2])), ("components", u(&[1, 2, 3, 4]))])).unwrap();
        assert_eq!(r["composed"].value(0), Value::Tuple(vec![Value::UInt(1), Value::UInt(3)]));
        let asm = Assemble::new(T::U64, 2, T::U64).unwrap();
        let r = asm.apply(&ports(&[("segment_length", u(&[2])), ("components", u(&[1, 2, 3, 4]))])).unwrap();
        assert_eq!(r["composed"].value(1), Value::Tuple(vec![Value::UInt(3), Value::UInt(4)]));
        assert!(asm.apply(&ports(&[("segment_length", u(&[2])), ("components", u(&[1, 2, 3]))])).is_err());
    }
}
