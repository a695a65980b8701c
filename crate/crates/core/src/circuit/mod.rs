//! Port digraphs with operator-labeled vertices, their validity rules and evaluation.

mod builder;
mod eval;
mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::column::ElementType;
use crate::ops::OpRef;

pub use builder::{BuildError, Builder, Wire};
pub use eval::{set_thread_count, EvalError, Trace};
pub use json::CircuitFileError;

/// Typed input and output labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub inputs: BTreeMap<String, ElementType>,
    pub outputs: BTreeMap<String, ElementType>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_input(mut self, label: impl Into<String>, ty: ElementType) -> Self {
        self.inputs.insert(label.into(), ty);
        self
    }

    pub fn with_output(mut self, label: impl Into<String>, ty: ElementType) -> Self {
        self.outputs.insert(label.into(), ty);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub vertex: String,
    pub port: String,
    pub dir: Direction,
}

impl PortRef {
    pub fn input(vertex: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef { vertex: vertex.into(), port: port.into(), dir: Direction::In }
    }

    pub fn output(vertex: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef { vertex: vertex.into(), port: port.into(), dir: Direction::Out }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.vertex, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: PortRef,
    pub to: PortRef,
}

impl Edge {
    pub fn new(from: PortRef, to: PortRef) -> Self {
        Edge { from, to }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InvalidVertexId(String),
    LabelOnBothSides(String),
    UnknownPort(PortRef),
    WrongDirection(PortRef),
    Cycle(Vec<String>),
    MultiFedPort(PortRef),
    TypeMismatch { from: PortRef, to: PortRef, from_ty: ElementType, to_ty: ElementType },
    DanglingInterface(String),
    InterfaceTypeMismatch { label: String, expected: ElementType, found: ElementType },
    EngagedInputMapped { label: String, port: PortRef },
    InputMappedTwice(PortRef),
    UnmappedDisengagedInput(PortRef),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidVertexId(v) => write!(f, "vertex id `{v}` is empty or contains '.'"),
            Violation::LabelOnBothSides(l) => {
                write!(f, "label `{l}` is both an input and an output")
            }
            Violation::UnknownPort(p) => write!(f, "unknown port {p}"),
            Violation::WrongDirection(p) => write!(f, "port {p} used against its direction"),
            Violation::Cycle(vs) => write!(f, "cycle through {}", vs.join(", ")),
            Violation::MultiFedPort(p) => write!(f, "in-port {p} is fed more than once"),
            Violation::TypeMismatch { from, to, from_ty, to_ty } => {
                write!(f, "edge {from} ({from_ty}) -> {to} ({to_ty}) joins different types")
            }
            Violation::DanglingInterface(l) => write!(f, "label `{l}` is not consistently mapped"),
            Violation::InterfaceTypeMismatch { label, expected, found } => {
                write!(f, "label `{label}` declared {expected} but its port is {found}")
            }
            Violation::EngagedInputMapped { label, port } => {
                write!(f, "input `{label}` maps to {port}, which already has an incoming edge")
            }
            Violation::InputMappedTwice(p) => write!(f, "in-port {p} is the image of two inputs"),
            Violation::UnmappedDisengagedInput(p) => write!(f, "in-port {p} has no source"),
        }
    }
}

/// A columnar circuit: vertices carrying operators, port-to-port edges and an interface.
#[derive(Clone, Debug, Default)]
pub struct Circuit {
    pub signature: Signature,
    pub vertices: BTreeMap<String, OpRef>,
    pub edges: BTreeSet<Edge>,
    pub interface: BTreeMap<String, PortRef>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Element type of a vertex port, if the port exists on the stated side.
    pub fn port_type(&self, p: &PortRef) -> Option<&ElementType> {
        let sig = self.vertices.get(&p.vertex)?.signature();
        match p.dir {
            Direction::In => sig.inputs.get(&p.port),
            Direction::Out => sig.outputs.get(&p.port),
        }
    }

    pub fn in_ports(&self) -> impl Iterator<Item = PortRef> + '_ {
        self.vertices
            .iter()
            .flat_map(|(v, op)| op.signature().inputs.keys().map(move |p| PortRef::input(v.clone(), p.clone())))
    }

    /// For every fed in-port, its source out-port.
    pub fn sources(&self) -> BTreeMap<PortRef, PortRef> {
        self.edges.iter().map(|e| (e.to.clone(), e.from.clone())).collect()
    }

    /// Input label feeding each in-port named in the interface.
    pub fn input_feeds(&self) -> BTreeMap<PortRef, String> {
        self.signature.inputs.keys().filter_map(|l| self.interface.get(l).map(|p| (p.clone(), l.clone()))).collect()
    }

    /// Vertex ids in dependency levels; `None` if the layout graph has a cycle.
    pub fn levels(&self) -> Option<Vec<Vec<String>>> {
        let mut indeg: BTreeMap<&str, usize> = self.vertices.keys().map(|v| (v.as_str(), 0)).collect();
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            if let (Some(_), Some(d)) = (self.vertices.get(&e.from.vertex), indeg.get_mut(e.to.vertex.as_str())) {
                *d += 1;
                succ.entry(e.from.vertex.as_str()).or_default().push(e.to.vertex.as_str());
            }
        }
        let mut levels = Vec::new();
        let mut ready: Vec<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(v, _)| *v).collect();
        let mut seen = 0;
        while !ready.is_empty() {
            seen += ready.len();
            let mut next = Vec::new();
            for v in &ready {
                for s in succ.get(v).map(|x| x.as_slice()).unwrap_or(&[]) {
                    let d = indeg.get_mut(s).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        next.push(*s);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            levels.push(ready.iter().map(|s| s.to_string()).collect());
            ready = next;
        }
        (seen == self.vertices.len()).then_some(levels)
    }

    pub fn topological_order(&self) -> Option<Vec<String>> {
        self.levels().map(|l| l.into_iter().flatten().collect())
    }

    /// All violations of the circuit conditions; empty when valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for v in self.vertices.keys() {
            if v.is_empty() || v.contains('.') {
                out.push(Violation::InvalidVertexId(v.clone()));
            }
        }
        for l in self.signature.inputs.keys() {
            if self.signature.outputs.contains_key(l) {
                out.push(Violation::LabelOnBothSides(l.clone()));
            }
        }
        let mut fed: BTreeMap<&PortRef, usize> = BTreeMap::new();
        let mut edges_ok = true;
        for e in &self.edges {
            let mut ok = true;
            for (p, want) in [(&e.from, Direction::Out), (&e.to, Direction::In)] {
                if p.dir != want {
                    out.push(Violation::WrongDirection(p.clone()));
                    ok = false;
                } else if self.port_type(p).is_none() {
                    out.push(Violation::UnknownPort(p.clone()));
                    ok = false;
                }
            }
            edges_ok &= ok;
            if !ok {
                continue;
            }
            *fed.entry(&e.to).or_insert(0) += 1;
            let (a, b) = (self.port_type(&e.from).unwrap(), self.port_type(&e.to).unwrap());
            if a != b {
                out.push(Violation::TypeMismatch {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    from_ty: a.clone(),
                    to_ty: b.clone(),
                });
            }
        }
        for (p, n) in &fed {
            if *n > 1 {
                out.push(Violation::MultiFedPort((*p).clone()));
            }
        }
        if edges_ok && self.levels().is_none() {
            out.push(Violation::Cycle(self.cycle_members()));
        }

        // Interface: inputs biject onto disengaged in-ports, outputs map to out-ports.
        let mut images: BTreeMap<&PortRef, usize> = BTreeMap::new();
        for (label, ty) in &self.signature.inputs {
            let Some(p) = self.interface.get(label) else {
                out.push(Violation::DanglingInterface(label.clone()));
                continue;
            };
            if p.dir != Direction::In {
                out.push(Violation::WrongDirection(p.clone()));
                continue;
            }
            let Some(pt) = self.port_type(p) else {
                out.push(Violation::UnknownPort(p.clone()));
                continue;
            };
            if pt != ty {
                out.push(Violation::InterfaceTypeMismatch {
                    label: label.clone(),
                    expected: ty.clone(),
                    found: pt.clone(),
                });
            }
            if fed.contains_key(p) {
                out.push(Violation::EngagedInputMapped { label: label.clone(), port: p.clone() });
            }
            *images.entry(p).or_insert(0) += 1;
        }
        for (p, n) in &images {
            if *n > 1 {
                out.push(Violation::InputMappedTwice((*p).clone()));
            }
        }
        for p in self.in_ports() {
            if !fed.contains_key(&p) && !images.contains_key(&p) {
                out.push(Violation::UnmappedDisengagedInput(p));
            }
        }
        for (label, ty) in &self.signature.outputs {
            let Some(p) = self.interface.get(label) else {
                out.push(Violation::DanglingInterface(label.clone()));
                continue;
            };
            if p.dir != Direction::Out {
                out.push(Violation::WrongDirection(p.clone()));
                continue;
            }
            match self.port_type(p) {
                None => out.push(Violation::UnknownPort(p.clone())),
                Some(pt) if pt != ty => out.push(Violation::InterfaceTypeMismatch {
                    label: label.clone(),
                    expected: ty.clone(),
                    found: pt.clone(),
                }),
                _ => {}
            }
        }
        for label in self.interface.keys() {
            if !self.signature.inputs.contains_key(label) && !self.signature.outputs.contains_key(label) {
                out.push(Violation::DanglingInterface(label.clone()));
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    fn cycle_members(&self) -> Vec<String> {
        // Vertices left after repeatedly removing sources and sinks.
        let mut alive: BTreeSet<&str> = self.vertices.keys().map(|s| s.as_str()).collect();
        loop {
            let before = alive.len();
            let live_edges: Vec<(&str, &str)> = self
                .edges
                .iter()
                .map(|e| (e.from.vertex.as_str(), e.to.vertex.as_str()))
                .filter(|(a, b)| alive.contains(a) && alive.contains(b))
                .collect();
            alive.retain(|v| live_edges.iter().any(|(_, b)| b == v) && live_edges.iter().any(|(a, _)| a == v));
            if alive.len() == before {
                break;
            }
        }
        alive.into_iter().map(String::from).collect()
    }

    /// Vertices reachable from `v` along edges (excluding `v` unless on a cycle).
    pub fn descendants(&self, v: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![v.to_string()];
        while let Some(x) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.from.vertex == x) {
                if seen.insert(e.to.vertex.clone()) {
                    stack.push(e.to.vertex.clone());
                }
            }
        }
        seen
    }

    /// Renames interface labels; labels not in `map` keep their names.
    pub fn relabel(&self, map: &BTreeMap<String, String>) -> Circuit {
        let r = |l: &String| map.get(l).cloned().unwrap_or_else(|| l.clone());
        Circuit {
            signature: Signature {
                inputs: self.signature.inputs.iter().map(|(l, t)| (r(l), t.clone())).collect(),
                outputs: self.signature.outputs.iter().map(|(l, t)| (r(l), t.clone())).collect(),
            },
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            interface: self.interface.iter().map(|(l, p)| (r(l), p.clone())).collect(),
        }
    }

    /// Prefixes every vertex id with `prefix`.
    pub fn rename_vertices(&self, prefix: &str) -> Circuit {
        let rp = |p: &PortRef| PortRef { vertex: format!("{prefix}{}", p.vertex), ..p.clone() };
        Circuit {
            signature: self.signature.clone(),
            vertices: self.vertices.iter().map(|(v, op)| (format!("{prefix}{v}"), op.clone())).collect(),
            edges: self.edges.iter().map(|e| Edge::new(rp(&e.from), rp(&e.to))).collect(),
            interface: self.interface.iter().map(|(l, p)| (l.clone(), rp(p))).collect(),
        }
    }
}
