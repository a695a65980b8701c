use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use super::{Circuit, PortRef, Violation};
use crate::column::{Column, ElementType};
use crate::ops::{OpError, Ports};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid circuit: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("unknown input `{0}`")]
    UnknownInput(String),
    #[error("input `{label}` expects {expected}, got {found}")]
    InputTypeMismatch { label: String, expected: ElementType, found: ElementType },
    #[error("vertex `{vertex}` ({op}) failed: {source}")]
    OperatorFailure { vertex: String, op: String, source: OpError },
    #[error("decision output has length {0}, not 1")]
    NonScalarOutput(usize),
    #[error("not a decision circuit: {0}")]
    NotDecision(String),
}

/// Columns observed at every port during one evaluation.
pub type Trace = BTreeMap<PortRef, Column>;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
static REQUESTED: Mutex<Option<usize>> = Mutex::new(None);

/// Sets the evaluation thread count; only effective before the first concurrent evaluation.
pub fn set_thread_count(n: usize) {
    *REQUESTED.lock().unwrap() = Some(n.max(1));
}

fn pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let n = REQUESTED
            .lock()
            .unwrap()
            .or_else(|| std::env::var("COLCIRC_THREADS").ok().and_then(|s| s.parse().ok()))
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .thread_name(|i| format!("colcirc-eval-{i}"))
            .build()
            .expect("evaluation thread pool")
    })
}

enum Feed {
    Edge(PortRef),
    Input(String),
}

impl Circuit {
    fn prepare(&self, inputs: &Ports) -> Result<BTreeMap<PortRef, Feed>, EvalError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(EvalError::Invalid(violations));
        }
        for (label, ty) in &self.signature.inputs {
            let c = inputs.get(label).ok_or_else(|| EvalError::MissingInput(label.clone()))?;
            if c.element_type() != ty {
                return Err(EvalError::InputTypeMismatch {
                    label: label.clone(),
                    expected: ty.clone(),
                    found: c.element_type().clone(),
                });
            }
        }
        if let Some(l) = inputs.keys().find(|l| !self.signature.inputs.contains_key(*l)) {
            return Err(EvalError::UnknownInput(l.clone()));
        }
        let mut feeds: BTreeMap<PortRef, Feed> =
            self.sources().into_iter().map(|(to, from)| (to, Feed::Edge(from))).collect();
        for (p, l) in self.input_feeds() {
            feeds.insert(p, Feed::Input(l));
        }
        Ok(feeds)
    }

    fn run_vertex(
        &self,
        v: &str,
        feeds: &BTreeMap<PortRef, Feed>,
        inputs: &Ports,
        produced: &dyn Fn(&PortRef) -> Column,
    ) -> Result<Ports, EvalError> {
        let op = &self.vertices[v];
        let mut args = Ports::new();
        for label in op.signature().inputs.keys() {
            let p = PortRef::input(v, label.clone());
            let col = match &feeds[&p] {
                Feed::Edge(src) => produced(src),
                Feed::Input(l) => inputs[l].clone(),
            };
            args.insert(label.clone(), col);
        }
        let fail = |source| EvalError::OperatorFailure { vertex: v.to_string(), op: op.name().to_string(), source };
        let out = op.apply(&args).map_err(fail)?;
        for (label, ty) in &op.signature().outputs {
            match out.get(label) {
                Some(c) if c.element_type() == ty => {}
                Some(c) => {
                    return Err(fail(OpError::Precondition(format!(
                        "operator produced {} on `{label}`, declared {ty}",
                        c.element_type()
                    ))))
                }
                None => return Err(fail(OpError::Precondition(format!("operator produced no `{label}`")))),
            }
        }
        Ok(out)
    }

    fn collect_outputs(&self, produced: &dyn Fn(&PortRef) -> Column) -> Ports {
        self.signature.outputs.keys().map(|l| (l.clone(), produced(&self.interface[l]))).collect()
    }

    /// Evaluates the circuit, running independent vertices concurrently.
    pub fn evaluate(&self, inputs: &Ports) -> Result<Ports, EvalError> {
        let feeds = self.prepare(inputs)?;
        let levels = self.levels().expect("validated circuit is acyclic");
        let mut results: HashMap<String, Ports> = HashMap::with_capacity(self.vertices.len());
        for level in levels {
            let get = |p: &PortRef| results[&p.vertex][&p.port].clone();
            let outs: Vec<Result<Ports, EvalError>> = if level.len() == 1 {
                vec![self.run_vertex(&level[0], &feeds, inputs, &get)]
            } else {
                pool().install(|| level.par_iter().map(|v| self.run_vertex(v, &feeds, inputs, &get)).collect())
            };
            let mut done = Vec::with_capacity(level.len());
            for (v, r) in level.into_iter().zip(outs) {
                done.push((v, r?));
            }
            results.extend(done);
        }
        Ok(self.collect_outputs(&|p| results[&p.vertex][&p.port].clone()))
    }

    /// Single-threaded evaluation in topological order.
    pub fn evaluate_sequential(&self, inputs: &Ports) -> Result<Ports, EvalError> {
        Ok(self.evaluate_traced(inputs)?.0)
    }

    /// Evaluation that also records the column at every in- and out-port.
    pub fn evaluate_traced(&self, inputs: &Ports) -> Result<(Ports, Trace), EvalError> {
        let feeds = self.prepare(inputs)?;
        let order = self.topological_order().expect("validated circuit is acyclic");
        let mut results: HashMap<String, Ports> = HashMap::with_capacity(self.vertices.len());
        let mut trace = Trace::new();
        for v in order {
            let get = |p: &PortRef| results[&p.vertex][&p.port].clone();
            let out = self.run_vertex(&v, &feeds, inputs, &get)?;
            for label in self.vertices[&v].signature().inputs.keys() {
                let p = PortRef::input(v.clone(), label.clone());
                let col = match &feeds[&p] {
                    Feed::Edge(src) => get(src),
                    Feed::Input(l) => inputs[l].clone(),
                };
                trace.insert(p, col);
            }
            for (label, c) in &out {
                trace.insert(PortRef::output(v.clone(), label.clone()), c.clone());
            }
            results.insert(v, out);
        }
        let outs = self.collect_outputs(&|p| results[&p.vertex][&p.port].clone());
        Ok((outs, trace))
    }

    /// Demand-driven evaluation straight from the inductive definition: the value at an
    /// out-port is its operator applied to the values at the vertex's in-ports.
    pub fn evaluate_reference(&self, inputs: &Ports) -> Result<Ports, EvalError> {
        let feeds = self.prepare(inputs)?;
        let mut memo: HashMap<String, Ports> = HashMap::new();
        let mut outputs = Ports::new();
        for (label, p) in self.signature.outputs.keys().map(|l| (l, &self.interface[l])) {
            outputs.insert(label.clone(), self.port_value(p, &feeds, inputs, &mut memo)?);
        }
        // Vertices not feeding an output still have to be defined.
        for v in self.vertices.keys() {
            self.reference_vertex(v, &feeds, inputs, &mut memo)?;
        }
        Ok(outputs)
    }

    fn reference_vertex(
        &self,
        v: &str,
        feeds: &BTreeMap<PortRef, Feed>,
        inputs: &Ports,
        memo: &mut HashMap<String, Ports>,
    ) -> Result<(), EvalError> {
        if memo.contains_key(v) {
            return Ok(());
        }
        let mut upstream = BTreeMap::new();
        for label in self.vertices[v].signature().inputs.keys() {
            if let Feed::Edge(src) = &feeds[&PortRef::input(v, label.clone())] {
                upstream.insert(src.clone(), self.port_value(src, feeds, inputs, memo)?);
            }
        }
        let out = self.run_vertex(v, feeds, inputs, &|p| upstream[p].clone())?;
        memo.insert(v.to_string(), out);
        Ok(())
    }

    fn port_value(
        &self,
        p: &PortRef,
        feeds: &BTreeMap<PortRef, Feed>,
        inputs: &Ports,
        memo: &mut HashMap<String, Ports>,
    ) -> Result<Column, EvalError> {
        self.reference_vertex(&p.vertex, feeds, inputs, memo)?;
        Ok(memo[&p.vertex][&p.port].clone())
    }

    /// Runs a decision circuit: one bit output, which must have length 1.
    pub fn evaluate_decision(&self, inputs: &Ports) -> Result<bool, EvalError> {
        let mut outs = self.signature.outputs.iter();
        match (outs.next(), outs.next()) {
            (Some((_, ElementType::Bit)), None) => {}
            _ => return Err(EvalError::NotDecision("expected exactly one bit output".into())),
        }
        let out = self.evaluate(inputs)?.into_values().next().unwrap();
        if out.len() != 1 {
            return Err(EvalError::NonScalarOutput(out.len()));
        }
        Ok(out.value(0).as_bool().unwrap())
    }
}
