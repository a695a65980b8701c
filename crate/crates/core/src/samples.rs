//! Ready-made circuits: small worked examples, a Q6-shaped query and a random circuit
//! generator over the catalog.

use std::collections::BTreeMap;

use rand::Rng;

use crate::circuit::{Builder, Circuit, Wire};
use crate::column::{Column, ElementType, Value};
use crate::ops::{Aggregate, AggregateMode, CmpOp, Derivative, ElementwiseFn, Ports, SplitFirst};

/// `out = 2·col + 3` over a u32 column, computed in u64.
pub fn two_x_plus_3() -> Circuit {
    let mut b = Builder::new();
    let x = b.input("col", ElementType::U32);
    let x = b.cast(&x, &ElementType::U64);
    let d = b.with_const(ElementwiseFn::Mul, &x, 2u64);
    let r = b.with_const(ElementwiseFn::Add, &d, 3u64);
    b.output("out", &r);
    b.finish().expect("2x+3 circuit")
}

/// Filter bounds of the Q6-shaped query. Discounts are in hundredths.
#[derive(Clone, Copy, Debug)]
pub struct Q6 {
    pub ship_from: u32,
    pub ship_until: u32,
    pub discount_lo: u8,
    pub discount_hi: u8,
    pub quantity_below: u8,
}

impl Default for Q6 {
    fn default() -> Self {
        // 1994-01-01 up to 1995-01-01 in days since the epoch, discount 0.06 ± 0.01.
        Q6 { ship_from: 8766, ship_until: 9131, discount_lo: 5, discount_hi: 7, quantity_below: 24 }
    }
}

impl Q6 {
    /// Inputs `l_shipdate: u32`, `l_discount: u8`, `l_quantity: u8`, `l_extendedprice: u64`
    /// (cents); output `revenue: u64`, the sum of price·discount over qualifying rows.
    pub fn circuit(&self) -> Circuit {
        let mut b = Builder::new();
        let ship = b.input("l_shipdate", ElementType::U32);
        let disc = b.input("l_discount", ElementType::U8);
        let qty = b.input("l_quantity", ElementType::U8);
        let price = b.input("l_extendedprice", ElementType::U64);
        let in_year = b.unary(
            ElementwiseFn::InRange {
                lo: Value::UInt(self.ship_from as u64),
                hi: Value::UInt(self.ship_until as u64 - 1),
            },
            &ship,
        );
        let in_disc = b.unary(
            ElementwiseFn::InRange {
                lo: Value::UInt(self.discount_lo as u64),
                hi: Value::UInt(self.discount_hi as u64),
            },
            &disc,
        );
        let small = b.compare(&qty, CmpOp::Lt, Value::UInt(self.quantity_below as u64));
        let m = b.binary(ElementwiseFn::And, &in_year, &in_disc);
        let m = b.binary(ElementwiseFn::And, &m, &small);
        let p = b.select(&price, &m);
        let d = b.select(&disc, &m);
        let d = b.cast(&d, &ElementType::U64);
        let r = b.binary(ElementwiseFn::Mul, &p, &d);
        let s = b.reduce(&r, Aggregate::Add);
        b.output("revenue", &s);
        b.finish().expect("q6 circuit")
    }
}

/// A circuit equivalent to a NoOp on `ty`: the head followed by the head plus the prefix
/// sums of the derivative. Labels `arg` and `result`, like NoOp. Needs a nonempty column.
pub fn derivative_identity(ty: &ElementType) -> Circuit {
    let mut b = Builder::new();
    let x = b.input("arg", ty.clone());
    let parts = b.apply(Ok(SplitFirst::new(ty.clone())), &[("col", &x)]);
    let head = parts["head"].clone();
    let d = b.apply1(Derivative::new(ty.clone()), &[("col", &x)]);
    let p = b.prefix(&d, Aggregate::Add, AggregateMode::Inclusive);
    let h = b.cast(&head, &d.ty);
    let rest = b.with_scalar(ElementwiseFn::Add, &p, &h);
    let rest = b.cast(&rest, ty);
    let r = b.concat(&[&head, &rest]);
    b.output("result", &r);
    b.finish().expect("derivative identity")
}

const BOUND: u64 = 1 << 40;

#[derive(Clone, Copy)]
enum Step {
    Add(usize, usize),
    Min(usize, usize),
    Max(usize, usize),
    AddConst(usize, u64),
    MulConst(usize, u64),
    PrefixMax(usize),
    PrefixSum(usize),
    Shuffle(usize, usize),
    Total(usize),
}

/// A random valid circuit over u32 inputs `x0..` of one common length, with inputs for it.
///
/// All interior wires are u64 columns of that length. Value bounds are tracked so no
/// operator overflows, and earlier steps are sometimes repeated to leave duplicates.
pub fn random_circuit(rng: &mut impl Rng) -> (Circuit, Ports) {
    let n: usize = rng.random_range(1..=40);
    let n64 = n as u64;
    let k = rng.random_range(1..=3);
    let mut b = Builder::new();
    let mut wires: Vec<(Wire, u64)> = Vec::new();
    let mut inputs = Ports::new();
    for i in 0..k {
        let label = format!("x{i}");
        let w = b.input(&label, ElementType::U32);
        let vals: Vec<u64> = (0..n).map(|_| rng.random_range(0..(1u64 << 12))).collect();
        inputs.insert(label, Column::from_u64s(ElementType::U32, vals).unwrap());
        let w = b.cast(&w, &ElementType::U64);
        wires.push((w, 1 << 12));
    }
    let mut history: Vec<Step> = Vec::new();
    let steps = rng.random_range(3..=14);
    for _ in 0..steps {
        let step = if !history.is_empty() && rng.random_bool(0.2) {
            history[rng.random_range(0..history.len())]
        } else {
            let a = rng.random_range(0..wires.len());
            let c = rng.random_range(0..wires.len());
            match rng.random_range(0..9) {
                0 => Step::Add(a, c),
                1 => Step::Min(a, c),
                2 => Step::Max(a, c),
                3 => Step::AddConst(a, rng.random_range(0..100)),
                4 => Step::MulConst(a, rng.random_range(1..4)),
                5 => Step::PrefixMax(a),
                6 => Step::PrefixSum(a),
                7 => Step::Shuffle(a, c),
                _ => Step::Total(a),
            }
        };
        let bound = |i: usize| wires[i].1;
        let next = match step {
            Step::Add(a, c) => (bound(a) + bound(c) < BOUND)
                .then(|| (b.binary(ElementwiseFn::Add, &wires[a].0, &wires[c].0), bound(a) + bound(c))),
            Step::Min(a, c) => Some((b.binary(ElementwiseFn::Min, &wires[a].0, &wires[c].0), bound(a).max(bound(c)))),
            Step::Max(a, c) => Some((b.binary(ElementwiseFn::Max, &wires[a].0, &wires[c].0), bound(a).max(bound(c)))),
            Step::AddConst(a, v) => {
                (bound(a) + v < BOUND).then(|| (b.with_const(ElementwiseFn::Add, &wires[a].0, v), bound(a) + v))
            }
            Step::MulConst(a, v) => {
                (bound(a) * v < BOUND).then(|| (b.with_const(ElementwiseFn::Mul, &wires[a].0, v), bound(a) * v))
            }
            Step::PrefixMax(a) => Some((b.prefix(&wires[a].0, Aggregate::Max, AggregateMode::Inclusive), bound(a))),
            Step::PrefixSum(a) => (bound(a) * n64 < BOUND)
                .then(|| (b.prefix(&wires[a].0, Aggregate::Add, AggregateMode::Inclusive), bound(a) * n64)),
            Step::Shuffle(a, c) => {
                let len = b.length(&wires[c].0);
                let pos = b.with_scalar(ElementwiseFn::Mod, &wires[a].0, &len);
                Some((b.gather(&pos, &wires[c].0), bound(c)))
            }
            Step::Total(a) => (bound(a) * n64 < BOUND).then(|| {
                let s = b.reduce(&wires[a].0, Aggregate::Add);
                (b.broadcast(&s, &wires[a].0), bound(a) * n64)
            }),
        };
        if let Some(w) = next {
            wires.push(w);
            history.push(step);
        }
    }
    let outs = rng.random_range(1..=2.min(wires.len() - k).max(1));
    let mut used = BTreeMap::new();
    for j in 0..outs {
        let i = if wires.len() > k { rng.random_range(k..wires.len()) } else { rng.random_range(0..k) };
        if used.insert(i, j).is_none() {
            b.output(&format!("y{j}"), &wires[i].0);
        }
    }
    (b.finish().expect("random circuit"), inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one(label: &str, c: Column) -> Ports {
        let mut p = Ports::new();
        p.insert(label.into(), c);
        p
    }

    #[test]
    fn two_x_plus_3_example() {
        let c = two_x_plus_3();
        let col = Column::from_u64s(ElementType::U32, vec![1, 5]).unwrap();
        let out = c.evaluate(&one("col", col)).unwrap();
        assert_eq!(out["out"], Column::u64s(vec![5, 13]));
    }

    #[test]
    fn identity_is_noop() {
        let c = derivative_identity(&ElementType::U32);
        for v in [vec![7], vec![3, 1, 4, 1, 5], vec![u32::MAX as u64, 0, 9]] {
            let col = Column::from_u64s(ElementType::U32, v).unwrap();
            let out = c.evaluate(&one("arg", col.clone())).unwrap();
            assert_eq!(out["result"], col);
        }
        assert!(c.evaluate(&one("arg", Column::empty(ElementType::U32))).is_err());
    }

    #[test]
    fn q6_small() {
        let c = Q6::default().circuit();
        let mut p = Ports::new();
        p.insert("l_shipdate".into(), Column::from_u64s(ElementType::U32, vec![8766, 9131, 9000, 9000]).unwrap());
        p.insert("l_discount".into(), Column::from_u64s(ElementType::U8, vec![6, 6, 8, 5]).unwrap());
        p.insert("l_quantity".into(), Column::from_u64s(ElementType::U8, vec![1, 1, 1, 23]).unwrap());
        p.insert("l_extendedprice".into(), Column::u64s(vec![100, 1000, 10000, 7]));
        assert_eq!(c.evaluate(&p).unwrap()["revenue"], Column::u64s(vec![635]));
    }

    #[test]
    fn random_circuits_evaluate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (c, inputs) = random_circuit(&mut rng);
            assert!(c.is_valid());
            let a = c.evaluate(&inputs).unwrap();
            assert_eq!(a, c.evaluate_reference(&inputs).unwrap());
        }
    }
}
