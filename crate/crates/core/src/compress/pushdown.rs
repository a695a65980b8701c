//! Queries answered on encoded forms without decoding them.

use crate::circuit::{Builder, Circuit};
use crate::column::{Column, ElementType as T, Value};
use crate::ops::{Aggregate, CmpOp, ElementwiseFn as F};

/// Sum of an RLE-encoded column from its `length` and `value` columns: `Σ value[j]·length[j]`,
/// computed in the scheme's work type. Output `sum`.
pub fn rle_sum(value_ty: &T, length_ty: &T) -> Circuit {
    let w = super::work_type(value_ty);
    let mut b = Builder::new();
    let l = b.input("length", length_ty.clone());
    let v = b.input("value", value_ty.clone());
    let l = b.cast(&l, &w);
    let v = b.cast(&v, &w);
    let p = b.binary(F::Mul, &v, &l);
    let s = b.reduce(&p, Aggregate::Add);
    b.output("sum", &s);
    b.finish().expect("rle sum circuit")
}

/// Positions `i` with `col[i] = v`, ascending. Output `positions`.
pub fn equality_positions(ty: &T, v: Value) -> Circuit {
    let mut b = Builder::new();
    let c = b.input("col", ty.clone());
    let m = b.compare(&c, CmpOp::Eq, v);
    let p = b.select_indices(&m);
    b.output("positions", &p);
    b.finish().expect("equality selection circuit")
}

/// The surrogate of `v` in a dictionary with distinct entries: its index.
pub fn surrogate(dictionary: &Column, v: &Value) -> Option<u64> {
    dictionary.iter().position(|e| e == *v).map(|i| i as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec;
    use crate::ops::Ports;
    use serde_json::json;

    #[test]
    fn rle_sum_matches() {
        let col = Column::i64s(vec![-2, -2, 5, 5, 5, 0, 7]);
        let inst = codec::encode_column("run.rle", &json!({"type": "i64"}), &col).unwrap();
        let s = rle_sum(inst.columns["value"].element_type(), inst.columns["length"].element_type());
        let out = s.evaluate(&inst.columns).unwrap();
        assert_eq!(out["sum"], Column::i64s(vec![18]));
    }

    #[test]
    fn surrogate_selection() {
        let col = Column::u64s(vec![30, 10, 30, 20]);
        let inst = codec::encode_column("dict.unique", &json!({"type": "u64"}), &col).unwrap();
        let code = surrogate(&inst.columns["dictionary"], &Value::UInt(30)).unwrap();
        let idx = &inst.columns["indices"];
        let by_code = equality_positions(idx.element_type(), Value::UInt(code));
        let mut p = Ports::new();
        p.insert("col".into(), idx.clone());
        assert_eq!(by_code.evaluate(&p).unwrap()["positions"], Column::u64s(vec![0, 2]));
        assert_eq!(surrogate(&inst.columns["dictionary"], &Value::UInt(40)), None);
    }
}
