use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Circuit, Edge, PortRef, Violation};
use crate::column::{ElementType, Value};
use crate::ops::{
    Aggregate, AggregateMode, CatalogError, CmpOp, Concatenate, Elementwise, ElementwiseFn, Gather, Iota, Length, NoOp,
    OpRef, Operator, Permute, PrefixAggregate, Reduce, Replicate, Scalar, Scatter, Select, SelectIndices,
};

/// An out-port handle together with the type it carries.
#[derive(Clone, Debug, PartialEq)]
pub struct Wire {
    pub port: PortRef,
    pub ty: ElementType,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Operator(#[from] CatalogError),
    #[error("wiring: {0}")]
    Wiring(String),
    #[error("invalid circuit: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Incremental circuit construction. Every input label enters through a NoOp relay.
///
/// Errors do not interrupt building; the first one is reported by [`Builder::finish`].
#[derive(Default)]
pub struct Builder {
    c: Circuit,
    next: usize,
    err: Option<BuildError>,
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fail(&mut self, e: BuildError) -> Wire {
        if self.err.is_none() {
            self.err = Some(e);
        }
        Wire { port: PortRef::output("?", "?"), ty: ElementType::Bottom }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("{}_{}", sanitize(stem), self.next)
    }

    pub fn input(&mut self, label: &str, ty: ElementType) -> Wire {
        if self.c.signature.inputs.contains_key(label) || self.c.signature.outputs.contains_key(label) {
            return self.fail(BuildError::Wiring(format!("label `{label}` used twice")));
        }
        let v = self.fresh(&format!("in_{label}"));
        self.c.vertices.insert(v.clone(), Arc::new(NoOp::new(ty.clone())));
        self.c.signature.inputs.insert(label.to_string(), ty.clone());
        self.c.interface.insert(label.to_string(), PortRef::input(v.clone(), "arg"));
        Wire { port: PortRef::output(v, "result"), ty }
    }

    pub fn output(&mut self, label: &str, w: &Wire) {
        if self.c.signature.inputs.contains_key(label) || self.c.signature.outputs.contains_key(label) {
            self.fail(BuildError::Wiring(format!("label `{label}` used twice")));
            return;
        }
        self.c.signature.outputs.insert(label.to_string(), w.ty.clone());
        self.c.interface.insert(label.to_string(), w.port.clone());
    }

    /// Adds a vertex and connects the named in-ports; returns all out-ports.
    pub fn add(&mut self, op: OpRef, inputs: &[(&str, &Wire)]) -> BTreeMap<String, Wire> {
        let v = self.fresh(op.name());
        let sig = op.signature().clone();
        for (p, w) in inputs {
            match sig.inputs.get(*p) {
                None => {
                    self.fail(BuildError::Wiring(format!("{} has no input `{p}`", op.name())));
                }
                Some(t) if *t != w.ty => {
                    self.fail(BuildError::Wiring(format!("{}.{p} expects {t}, wired to {}", op.name(), w.ty)));
                }
                Some(_) => {
                    self.c.edges.insert(Edge::new(w.port.clone(), PortRef::input(v.clone(), *p)));
                }
            }
        }
        if inputs.len() != sig.inputs.len() {
            self.fail(BuildError::Wiring(format!("{} needs {} inputs", op.name(), sig.inputs.len())));
        }
        self.c.vertices.insert(v.clone(), op);
        sig.outputs.into_iter().map(|(p, ty)| (p.clone(), Wire { port: PortRef::output(v.clone(), p), ty })).collect()
    }

    pub fn apply<O: Operator + 'static>(
        &mut self,
        op: Result<O, CatalogError>,
        inputs: &[(&str, &Wire)],
    ) -> BTreeMap<String, Wire> {
        match op {
            Ok(op) => self.add(Arc::new(op), inputs),
            Err(e) => {
                self.fail(e.into());
                BTreeMap::new()
            }
        }
    }

    /// Like [`Builder::apply`] for operators with a single output.
    pub fn apply1<O: Operator + 'static>(&mut self, op: Result<O, CatalogError>, inputs: &[(&str, &Wire)]) -> Wire {
        let outs = self.apply(op, inputs);
        match outs.into_values().next() {
            Some(w) => w,
            None => self.fail(BuildError::Wiring("operator has no output".into())),
        }
    }

    pub fn finish(self) -> Result<Circuit, BuildError> {
        if let Some(e) = self.err {
            return Err(e);
        }
        let v = self.c.validate();
        if !v.is_empty() {
            return Err(BuildError::Invalid(v));
        }
        Ok(self.c)
    }

    // Single-operator helpers.

    pub fn scalar(&mut self, ty: &ElementType, v: impl Into<Value>) -> Wire {
        self.apply1(Scalar::new(ty.clone(), v.into()), &[])
    }

    pub fn scalar_u64(&mut self, v: u64) -> Wire {
        self.scalar(&ElementType::U64, v)
    }

    pub fn length(&mut self, w: &Wire) -> Wire {
        self.apply1(Length::new(w.ty.clone(), ElementType::U64), &[("col", w)])
    }

    pub fn iota(&mut self, len: &Wire) -> Wire {
        self.apply1(Iota::new(len.ty.clone()), &[("length", len)])
    }

    pub fn replicate(&mut self, value: &Wire, factor: &Wire) -> Wire {
        self.apply1(Replicate::new(value.ty.clone(), factor.ty.clone()), &[("value", value), ("factor", factor)])
    }

    pub fn gather(&mut self, pos: &Wire, data: &Wire) -> Wire {
        self.apply1(Gather::new(data.ty.clone(), pos.ty.clone()), &[("pos", pos), ("data", data)])
    }

    pub fn scatter(&mut self, col: &Wire, pos: &Wire, data: &Wire) -> Wire {
        self.apply1(Scatter::new(col.ty.clone(), pos.ty.clone()), &[("col", col), ("pos", pos), ("data", data)])
    }

    pub fn permute(&mut self, perm: &Wire, data: &Wire) -> Wire {
        self.apply1(Permute::new(data.ty.clone(), perm.ty.clone()), &[("permutation", perm), ("data", data)])
    }

    pub fn select(&mut self, data: &Wire, mask: &Wire) -> Wire {
        self.apply1(Ok(Select::new(data.ty.clone(), false)), &[("data", data), ("selection", mask)])
    }

    pub fn select_indices(&mut self, bits: &Wire) -> Wire {
        self.apply1(SelectIndices::new(ElementType::U64), &[("characteristic", bits)])
    }

    pub fn concat(&mut self, parts: &[&Wire]) -> Wire {
        let Some(first) = parts.first() else {
            return self.fail(BuildError::Wiring("empty concatenation".into()));
        };
        if parts.len() == 1 {
            return (*first).clone();
        }
        let labels: Vec<String> = (1..=parts.len()).map(|i| format!("col_{i}")).collect();
        let ins: Vec<(&str, &Wire)> = labels.iter().map(|l| l.as_str()).zip(parts.iter().copied()).collect();
        self.apply1(Concatenate::new(first.ty.clone(), parts.len()), &ins)
    }

    pub fn unary(&mut self, f: ElementwiseFn, a: &Wire) -> Wire {
        self.apply1(Elementwise::unary(f, a.ty.clone()), &[("arg", a)])
    }

    pub fn binary(&mut self, f: ElementwiseFn, a: &Wire, b: &Wire) -> Wire {
        self.apply1(Elementwise::binary(f, a.ty.clone()), &[("lhs", a), ("rhs", b)])
    }

    /// Casts unless the wire already has type `to`.
    pub fn cast(&mut self, a: &Wire, to: &ElementType) -> Wire {
        if a.ty == *to {
            return a.clone();
        }
        self.unary(ElementwiseFn::Cast { to: to.clone() }, a)
    }

    pub fn compare(&mut self, a: &Wire, cmp: CmpOp, v: impl Into<Value>) -> Wire {
        self.unary(ElementwiseFn::CompareConst { cmp, value: v.into() }, a)
    }

    pub fn prefix(&mut self, a: &Wire, op: Aggregate, mode: AggregateMode) -> Wire {
        self.apply1(PrefixAggregate::new(a.ty.clone(), op, mode), &[("data", a)])
    }

    pub fn reduce(&mut self, a: &Wire, op: Aggregate) -> Wire {
        self.apply1(Reduce::new(a.ty.clone(), op), &[("data", a)])
    }

    // Gadgets built from several operators.

    /// The scalar `s` repeated to the length of `like`.
    pub fn broadcast(&mut self, s: &Wire, like: &Wire) -> Wire {
        let n = self.length(like);
        self.replicate(s, &n)
    }

    /// Elementwise `f(a, c)` against a constant.
    pub fn with_const(&mut self, f: ElementwiseFn, a: &Wire, c: impl Into<Value>) -> Wire {
        let ty = a.ty.clone();
        let s = self.scalar(&ty, c);
        let b = self.broadcast(&s, a);
        self.binary(f, a, &b)
    }

    /// Elementwise `f(a, s)` against a length-1 column.
    pub fn with_scalar(&mut self, f: ElementwiseFn, a: &Wire, s: &Wire) -> Wire {
        let b = self.broadcast(s, a);
        self.binary(f, a, &b)
    }

    /// `n` zeros (or `false`s) of type `ty`; `n` is a u64 scalar.
    pub fn zeros(&mut self, ty: &ElementType, n: &Wire) -> Wire {
        let z = match ty {
            ElementType::Bit => Value::Bit(false),
            ElementType::Float(_) => Value::Float(0.0),
            ElementType::Int(_) => Value::Int(0),
            _ => Value::UInt(0),
        };
        let s = self.scalar(ty, z);
        self.replicate(&s, n)
    }

    pub fn ones_bits(&mut self, n: &Wire) -> Wire {
        let s = self.scalar(&ElementType::Bit, true);
        self.replicate(&s, n)
    }

    /// For run lengths `lengths`, the run number of every element of the expanded column.
    /// Zero-length runs are skipped.
    pub fn run_index(&mut self, lengths: &Wire) -> Wire {
        let l = self.cast(lengths, &ElementType::U64);
        let starts = self.prefix(&l, Aggregate::Add, AggregateMode::Exclusive);
        let n = self.reduce(&l, Aggregate::Add);
        let m = self.length(&l);
        let ids = self.iota(&m);
        let nz = self.compare(&l, CmpOp::Gt, 0u64);
        let ids = self.select(&ids, &nz);
        let at = self.select(&starts, &nz);
        let base = self.zeros(&ElementType::U64, &n);
        let marks = self.scatter(&base, &at, &ids);
        self.prefix(&marks, Aggregate::Max, AggregateMode::Inclusive)
    }

    /// `values[j]` repeated `lengths[j]` times, in order.
    pub fn expand(&mut self, values: &Wire, lengths: &Wire) -> Wire {
        let r = self.run_index(lengths);
        self.gather(&r, values)
    }

    /// Offsets of every expanded element within its run, with the run index.
    pub fn run_offsets(&mut self, lengths: &Wire) -> (Wire, Wire) {
        let l = self.cast(lengths, &ElementType::U64);
        let starts = self.prefix(&l, Aggregate::Add, AggregateMode::Exclusive);
        let r = self.run_index(&l);
        let n = self.length(&r);
        let i = self.iota(&n);
        let s = self.gather(&r, &starts);
        let off = self.binary(ElementwiseFn::Sub, &i, &s);
        (off, r)
    }

    /// Segment number `i / ℓ` of each index below `n` (both u64 scalars).
    pub fn segment_of(&mut self, n: &Wire, seg_len: &Wire) -> Wire {
        let i = self.iota(n);
        self.with_scalar(ElementwiseFn::Div, &i, seg_len)
    }

    /// Unsigned integer 0 or 1 from a bit column.
    pub fn bit_to_u64(&mut self, b: &Wire) -> Wire {
        self.cast(b, &ElementType::U64)
    }

    /// Dictionary decode where index 0 takes the next residual value and `v > 0` reads
    /// `dict[v − 1]`.
    pub fn dict_with_residual(&mut self, dict: &Wire, idx: &Wire, residual: &Wire) -> Wire {
        let n = self.length(idx);
        let all = self.iota(&n);
        let zero = Value::UInt(0);
        let covered = self.compare(idx, CmpOp::Ne, zero);
        let open = self.unary(ElementwiseFn::Not, &covered);
        let at = self.select(&all, &covered);
        let rest = self.select(&all, &open);
        let hit = self.select(idx, &covered);
        let entry = self.with_const(ElementwiseFn::Sub, &hit, 1u64);
        let vals = self.gather(&entry, dict);
        let pos = self.concat(&[&at, &rest]);
        let data = self.concat(&[&vals, residual]);
        self.permute(&pos, &data)
    }

    /// Index of every element of `a` in the concatenation of `a` and `b`, under the
    /// combined ordering given by `pos_a` and `pos_b`: returns `col` with `col[pos_a[j]] =
    /// a[j]` and `col[pos_b[j]] = b[j]`. Positions must jointly form a permutation.
    pub fn interleave(&mut self, pos_a: &Wire, a: &Wire, pos_b: &Wire, b: &Wire) -> Wire {
        let pa = self.cast(pos_a, &ElementType::U64);
        let pb = self.cast(pos_b, &ElementType::U64);
        let pos = self.concat(&[&pa, &pb]);
        let data = self.concat(&[a, b]);
        self.permute(&pos, &data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::Column;
    use crate::ops::Ports;

    #[test]
    fn expand_skips_empty_runs() {
        let mut b = Builder::new();
        let v = b.input("v", ElementType::U64);
        let l = b.input("l", ElementType::U64);
        let e = b.expand(&v, &l);
        let (off, _) = b.run_offsets(&l);
        b.output("out", &e);
        b.output("off", &off);
        let c = b.finish().unwrap();
        let mut p = Ports::new();
        p.insert("v".into(), Column::u64s(vec![7, 8, 9, 10]));
        p.insert("l".into(), Column::u64s(vec![0, 2, 0, 3]));
        let r = c.evaluate(&p).unwrap();
        assert_eq!(r["out"], Column::u64s(vec![8, 8, 10, 10, 10]));
        assert_eq!(r["off"], Column::u64s(vec![0, 1, 0, 1, 2]));
    }

    #[test]
    fn type_errors_surface_at_finish() {
        let mut b = Builder::new();
        let v = b.input("v", ElementType::U8);
        let i = b.input("i", ElementType::Bit);
        let g = b.gather(&i, &v);
        b.output("o", &g);
        assert!(b.finish().is_err());
    }
}
