//! Structural algebra over circuits. Every function returns a new circuit.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::circuit::{Circuit, Direction, Edge, PortRef, Signature, Violation};
use crate::ops::{Catalog, CatalogError, FusedOp, OpRef};

/// Reserved prefix for interface labels created by cutting edges.
pub const CUT_PREFIX: &str = "cut:";

#[derive(Debug, Clone, thiserror::Error)]
pub enum TransformError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("`{0}` is not an input label")]
    NotAnInput(String),
    #[error("port `{0}` does not exist")]
    UnknownPort(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("connecting `{0}` would create a cycle")]
    Cycle(String),
    #[error("port mapping: {0}")]
    Bijection(String),
    #[error("empty vertex set")]
    Empty,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("result is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

fn checked(c: Circuit) -> Result<Circuit, TransformError> {
    let v = c.validate();
    if v.is_empty() {
        Ok(c)
    } else {
        Err(TransformError::Invalid(v))
    }
}

/// One vertex, interface labels equal to its port names.
pub fn lift_operator(op: OpRef) -> Circuit {
    let v: String = op.name().chars().map(|c| if c == '.' { '_' } else { c }).collect();
    let mut c = Circuit::new();
    for (p, t) in &op.signature().inputs {
        c.signature.inputs.insert(p.clone(), t.clone());
        c.interface.insert(p.clone(), PortRef::input(v.clone(), p.clone()));
    }
    for (p, t) in &op.signature().outputs {
        c.signature.outputs.insert(p.clone(), t.clone());
        c.interface.insert(p.clone(), PortRef::output(v.clone(), p.clone()));
    }
    c.vertices.insert(v, op);
    c
}

/// Result of a disjoint union, with the renamings applied to the second circuit.
#[derive(Debug, Clone)]
pub struct Union {
    pub circuit: Circuit,
    pub vertex_map: BTreeMap<String, String>,
    pub label_map: BTreeMap<String, String>,
}

fn tag(name: &str, taken: &dyn Fn(&str) -> bool) -> String {
    let mut s = name.to_string();
    while taken(&s) {
        s.push_str("~2");
    }
    s
}

/// Disjoint union; colliding vertex ids and labels of `c2` are tagged with `~2`.
pub fn union_tagged(c1: &Circuit, c2: &Circuit) -> Union {
    let mut out = c1.clone();
    let mut vertex_map = BTreeMap::new();
    for v in c2.vertices.keys() {
        let t = tag(v, &|s| c1.vertices.contains_key(s) || c2.vertices.contains_key(s) && s != v);
        vertex_map.insert(v.clone(), t);
    }
    let used = |s: &str| {
        c1.interface.contains_key(s) || c1.signature.inputs.contains_key(s) || c1.signature.outputs.contains_key(s)
    };
    let mut label_map = BTreeMap::new();
    for l in c2.signature.inputs.keys().chain(c2.signature.outputs.keys()) {
        let own = |s: &str| s != l && (c2.signature.inputs.contains_key(s) || c2.signature.outputs.contains_key(s));
        label_map.insert(l.clone(), tag(l, &|s| used(s) || own(s)));
    }
    let rp = |p: &PortRef| PortRef { vertex: vertex_map[&p.vertex].clone(), ..p.clone() };
    for (v, op) in &c2.vertices {
        out.vertices.insert(vertex_map[v].clone(), op.clone());
    }
    for e in &c2.edges {
        out.edges.insert(Edge::new(rp(&e.from), rp(&e.to)));
    }
    for (l, t) in &c2.signature.inputs {
        out.signature.inputs.insert(label_map[l].clone(), t.clone());
    }
    for (l, t) in &c2.signature.outputs {
        out.signature.outputs.insert(label_map[l].clone(), t.clone());
    }
    for (l, p) in &c2.interface {
        let nl = label_map.get(l).cloned().unwrap_or_else(|| l.clone());
        out.interface.insert(nl, rp(p));
    }
    Union { circuit: out, vertex_map, label_map }
}

pub fn circuit_union(c1: &Circuit, c2: &Circuit) -> Circuit {
    union_tagged(c1, c2).circuit
}

/// Feeds input label `label` from the out-port `source`; the label leaves the interface.
pub fn assign_input(c: &Circuit, label: &str, source: &PortRef) -> Result<Circuit, TransformError> {
    let ty = c.signature.inputs.get(label).ok_or_else(|| {
        if c.signature.outputs.contains_key(label) {
            TransformError::NotAnInput(label.to_string())
        } else {
            TransformError::UnknownLabel(label.to_string())
        }
    })?;
    let target = c.interface.get(label).ok_or_else(|| TransformError::UnknownLabel(label.to_string()))?.clone();
    let src = PortRef { dir: Direction::Out, ..source.clone() };
    let src_ty = c.port_type(&src).ok_or_else(|| TransformError::UnknownPort(src.to_string()))?;
    if src_ty != ty {
        return Err(TransformError::TypeMismatch(format!("{src} carries {src_ty}, `{label}` expects {ty}")));
    }
    if src.vertex == target.vertex || c.descendants(&target.vertex).contains(&src.vertex) {
        return Err(TransformError::Cycle(label.to_string()));
    }
    let mut out = c.clone();
    out.signature.inputs.remove(label);
    out.interface.remove(label);
    out.edges.insert(Edge::new(src, target));
    checked(out)
}

pub fn cut_label(p: &PortRef) -> String {
    format!("{CUT_PREFIX}{}:{}", p.vertex, p.port)
}

/// The subcircuit on `set`; severed edges become interface labels named by [`cut_label`].
pub fn induced_subcircuit(c: &Circuit, set: &BTreeSet<String>) -> Result<Circuit, TransformError> {
    if let Some(v) = set.iter().find(|v| !c.vertices.contains_key(*v)) {
        return Err(TransformError::UnknownVertex(v.clone()));
    }
    let mut out = Circuit::new();
    for v in set {
        out.vertices.insert(v.clone(), c.vertices[v].clone());
    }
    for e in &c.edges {
        let (fi, ti) = (set.contains(&e.from.vertex), set.contains(&e.to.vertex));
        match (fi, ti) {
            (true, true) => {
                out.edges.insert(e.clone());
            }
            (false, true) => {
                let l = cut_label(&e.to);
                out.signature.inputs.insert(l.clone(), c.port_type(&e.to).unwrap().clone());
                out.interface.insert(l, e.to.clone());
            }
            (true, false) => {
                let l = cut_label(&e.from);
                out.signature.outputs.insert(l.clone(), c.port_type(&e.from).unwrap().clone());
                out.interface.insert(l, e.from.clone());
            }
            _ => {}
        }
    }
    for (l, p) in &c.interface {
        if set.contains(&p.vertex) {
            out.interface.insert(l.clone(), p.clone());
            if let Some(t) = c.signature.inputs.get(l) {
                out.signature.inputs.insert(l.clone(), t.clone());
            }
            if let Some(t) = c.signature.outputs.get(l) {
                out.signature.outputs.insert(l.clone(), t.clone());
            }
        }
    }
    Ok(out)
}

/// Replaces the subcircuit induced by `set` with `replacement`. `rho` maps replacement
/// labels to labels of the induced subcircuit; unmapped labels map to themselves. The
/// mapping must be a type-preserving bijection onto the induced subcircuit's labels.
pub fn replace_subcircuit(
    c: &Circuit,
    set: &BTreeSet<String>,
    replacement: &Circuit,
    rho: &BTreeMap<String, String>,
) -> Result<Circuit, TransformError> {
    let sub = induced_subcircuit(c, set)?;
    let map = |l: &String| rho.get(l).cloned().unwrap_or_else(|| l.clone());
    let mut covered = BTreeSet::new();
    let mut check = |ours: &Signature, theirs: &BTreeMap<String, crate::column::ElementType>, out: bool| {
        for (l, t) in theirs {
            let m = map(l);
            let side = if out { &ours.outputs } else { &ours.inputs };
            match side.get(&m) {
                None => return Err(TransformError::Bijection(format!("`{l}` maps to `{m}`, not a matching label"))),
                Some(u) if u != t => {
                    return Err(TransformError::TypeMismatch(format!("`{l}` is {t}, `{m}` is {u}")));
                }
                _ => {}
            }
            if !covered.insert(m.clone()) {
                return Err(TransformError::Bijection(format!("`{m}` is mapped twice")));
            }
        }
        Ok(())
    };
    check(&sub.signature, &replacement.signature.inputs, false)?;
    check(&sub.signature, &replacement.signature.outputs, true)?;
    if let Some(l) = sub.signature.inputs.keys().chain(sub.signature.outputs.keys()).find(|l| !covered.contains(*l)) {
        return Err(TransformError::Bijection(format!("`{l}` is not covered")));
    }
    let inv: BTreeMap<String, String> = replacement
        .signature
        .inputs
        .keys()
        .chain(replacement.signature.outputs.keys())
        .map(|l| (map(l), l.clone()))
        .collect();

    // Rename replacement vertices away from the kept ones.
    let kept: BTreeSet<&String> = c.vertices.keys().filter(|v| !set.contains(*v)).collect();
    let mut vmap = BTreeMap::new();
    for v in replacement.vertices.keys() {
        let t = tag(v, &|s| kept.contains(&s.to_string()) || (s != v && replacement.vertices.contains_key(s)));
        vmap.insert(v.clone(), t);
    }
    let rp = |p: &PortRef| PortRef { vertex: vmap[&p.vertex].clone(), ..p.clone() };
    let rport = |sub_label: &str| rp(&replacement.interface[&inv[sub_label]]);

    let mut out = Circuit { signature: c.signature.clone(), ..Circuit::default() };
    for v in &kept {
        out.vertices.insert((*v).clone(), c.vertices[*v].clone());
    }
    for (v, op) in &replacement.vertices {
        out.vertices.insert(vmap[v].clone(), op.clone());
    }
    for e in &replacement.edges {
        out.edges.insert(Edge::new(rp(&e.from), rp(&e.to)));
    }
    for e in &c.edges {
        let (fi, ti) = (set.contains(&e.from.vertex), set.contains(&e.to.vertex));
        match (fi, ti) {
            (false, false) => {
                out.edges.insert(e.clone());
            }
            (false, true) => {
                out.edges.insert(Edge::new(e.from.clone(), rport(&cut_label(&e.to))));
            }
            (true, false) => {
                out.edges.insert(Edge::new(rport(&cut_label(&e.from)), e.to.clone()));
            }
            _ => {}
        }
    }
    for (l, p) in &c.interface {
        let np = if set.contains(&p.vertex) { rport(l) } else { p.clone() };
        out.interface.insert(l.clone(), np);
    }
    checked(out)
}

/// Replaces `set` by one vertex running the induced subcircuit, registered as `name`.
pub fn fuse_subcircuit(
    c: &Circuit,
    set: &BTreeSet<String>,
    name: &str,
    catalog: &Catalog,
) -> Result<Circuit, TransformError> {
    if set.is_empty() {
        return Err(TransformError::Empty);
    }
    let sub = induced_subcircuit(c, set)?;
    let op = FusedOp::new(name, sub);
    catalog.register_composite(op.clone())?;
    let lifted = lift_operator(Arc::new(op));
    replace_subcircuit(c, set, &lifted, &BTreeMap::new())
}

/// Merges vertices with equal operator keys and equal in-port sources, to a fixpoint.
pub fn eliminate_duplicate_vertices(c: &Circuit) -> Circuit {
    let mut cur = c.clone();
    loop {
        let sources = cur.sources();
        let feeds = cur.input_feeds();
        let mut groups: BTreeMap<(String, Vec<(String, String)>), Vec<String>> = BTreeMap::new();
        for (v, op) in &cur.vertices {
            let Some(key) = op.dedup_key() else { continue };
            let mut ins = Vec::new();
            for p in op.signature().inputs.keys() {
                let pr = PortRef::input(v.clone(), p.clone());
                let src = match (sources.get(&pr), feeds.get(&pr)) {
                    (Some(s), _) => s.to_string(),
                    (None, Some(l)) => format!("label:{l}"),
                    _ => format!("free:{v}"),
                };
                ins.push((p.clone(), src));
            }
            groups.entry((key, ins)).or_default().push(v.clone());
        }
        let mut redirect: BTreeMap<String, String> = BTreeMap::new();
        for vs in groups.values().filter(|vs| vs.len() > 1) {
            for v in &vs[1..] {
                redirect.insert(v.clone(), vs[0].clone());
            }
        }
        if redirect.is_empty() {
            return cur;
        }
        let rd = |p: &PortRef| match redirect.get(&p.vertex) {
            Some(k) => PortRef { vertex: k.clone(), ..p.clone() },
            None => p.clone(),
        };
        let mut next = Circuit { signature: cur.signature.clone(), ..Circuit::default() };
        next.vertices = cur
            .vertices
            .iter()
            .filter(|(v, _)| !redirect.contains_key(*v))
            .map(|(v, o)| (v.clone(), o.clone()))
            .collect();
        next.edges = cur
            .edges
            .iter()
            .filter(|e| !redirect.contains_key(&e.to.vertex))
            .map(|e| Edge::new(rd(&e.from), e.to.clone()))
            .collect();
        next.interface = cur.interface.iter().map(|(l, p)| (l.clone(), rd(p))).collect();
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Builder;
    use crate::column::{Column, ElementType as T};
    use crate::ops::{ElementwiseFn, Iota, Ports};

    fn two_x_plus_3() -> Circuit {
        let mut b = Builder::new();
        let x = b.input("col", T::U64);
        let d = b.with_const(ElementwiseFn::Mul, &x, 2u64);
        let r = b.with_const(ElementwiseFn::Add, &d, 3u64);
        b.output("out", &r);
        b.finish().unwrap()
    }

    fn run(c: &Circuit, v: Vec<u64>) -> Column {
        let mut p = Ports::new();
        p.insert(c.signature.inputs.keys().next().unwrap().clone(), Column::u64s(v));
        c.evaluate(&p).unwrap().into_values().next().unwrap()
    }

    #[test]
    fn lift_and_induce_whole() {
        let c = lift_operator(Arc::new(Iota::new(T::U64).unwrap()));
        assert!(c.is_valid());
        let all: BTreeSet<String> = c.vertices.keys().cloned().collect();
        let d = induced_subcircuit(&c, &all).unwrap();
        assert_eq!(d.to_json(), c.to_json());
    }

    #[test]
    fn union_tags_collisions() {
        let c = lift_operator(Arc::new(Iota::new(T::U64).unwrap()));
        let u = circuit_union(&c, &c);
        assert_eq!(u.vertices.len(), 2);
        assert_eq!(u.signature.inputs.len(), 2);
        assert!(u.is_valid());
        let e = circuit_union(&c, &Circuit::new());
        assert_eq!(e.to_json(), c.to_json());
    }

    #[test]
    fn fuse_whole_circuit() {
        let c = two_x_plus_3();
        let cat = Catalog::standard();
        let all: BTreeSet<String> = c.vertices.keys().cloned().collect();
        let f = fuse_subcircuit(&c, &all, "two_x_plus_3", &cat).unwrap();
        assert_eq!(f.vertices.len(), 1);
        assert_eq!(run(&f, vec![1, 5]), Column::u64s(vec![5, 13]));
        assert!(fuse_subcircuit(&c, &all, "two_x_plus_3", &cat).is_err());
    }

    #[test]
    fn assign_detects_cycles() {
        let c = two_x_plus_3();
        let out = c.interface["out"].clone();
        assert!(matches!(assign_input(&c, "col", &out), Err(TransformError::Cycle(_))));
    }

    #[test]
    fn dedup_merges_constants() {
        let mut b = Builder::new();
        let x = b.input("x", T::U64);
        let s1 = b.scalar_u64(4);
        let s2 = b.scalar_u64(4);
        let i1 = b.iota(&s1);
        let i2 = b.iota(&s2);
        let a = b.binary(ElementwiseFn::Add, &i1, &i2);
        let g = b.gather(&x, &a);
        b.output("o", &g);
        let c = b.finish().unwrap();
        let d = eliminate_duplicate_vertices(&c);
        assert_eq!(d.vertices.len(), c.vertices.len() - 2);
        assert_eq!(run(&d, vec![3, 0]), Column::u64s(vec![6, 0]));
        assert_eq!(eliminate_duplicate_vertices(&d).to_json(), d.to_json());
    }
}
