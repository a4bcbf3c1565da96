//! Floating-point evaluation.
//!
//! Expressions are compiled into a flat [`Tape`] in which every distinct node
//! appears once, then evaluated in a single forward sweep. A [`Batch`] groups
//! many component arrays into one tape so shared subexpressions are computed
//! once per point.

use std::collections::HashMap;

use ndarray::{ArrayD, ArrayViewD, IxDyn};
use thiserror::Error;

use super::{rational_to_f64, Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("logarithm of non-positive value {value} in `{subtree}`")]
    LogDomain { value: f64, subtree: String },
    #[error("division by zero in `{subtree}`")]
    DivisionByZero { subtree: String },
    #[error("coordinate `{0}` is not assigned by the point")]
    UnassignedCoordinate(String),
    #[error("point has {got} values for {want} coordinates")]
    PointArity { want: usize, got: usize },
}

impl EvalError {
    /// Domain errors make a sample point unusable; other errors are bugs or
    /// input mistakes.
    pub fn is_domain(&self) -> bool {
        matches!(self, EvalError::LogDomain { .. } | EvalError::DivisionByZero { .. })
    }
}

/// An assignment of real values to named coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    names: Vec<String>,
    values: Vec<f64>,
}

impl Point {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Point, EvalError> {
        if names.len() != values.len() {
            return Err(EvalError::PointArity { want: names.len(), got: values.len() });
        }
        Ok(Point { names, values })
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Point {
        Point {
            names: pairs.iter().map(|(n, _)| n.to_string()).collect(),
            values: pairs.iter().map(|(_, v)| *v).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Var(usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, i32),
    Apply(Func, usize),
}

/// A compiled, deduplicated evaluation order for a set of expressions.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    sources: Vec<Expr>,
    outputs: Vec<usize>,
    arity: usize,
}

impl Tape {
    pub fn compile<S: AsRef<str>>(roots: &[Expr], coords: &[S]) -> Result<Tape, EvalError> {
        let index: HashMap<&str, usize> =
            coords.iter().enumerate().map(|(i, c)| (c.as_ref(), i)).collect();
        let mut slot_of: HashMap<usize, usize> = HashMap::new();
        let mut ops = Vec::new();
        let mut sources = Vec::new();
        let mut outputs = Vec::with_capacity(roots.len());

        // Iterative post-order walk; deep sums would overflow a recursive one.
        for root in roots {
            let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
            while let Some((e, expanded)) = stack.pop() {
                if slot_of.contains_key(&e.id()) {
                    continue;
                }
                if !expanded {
                    stack.push((e.clone(), true));
                    match e.node() {
                        Node::Const(_) | Node::Coord(_) => {}
                        Node::Neg(a) | Node::Pow(a, _) | Node::Apply(_, a) => {
                            stack.push((a.clone(), false))
                        }
                        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                            stack.push((b.clone(), false));
                            stack.push((a.clone(), false));
                        }
                    }
                    continue;
                }
                let s = |x: &Expr| slot_of[&x.id()];
                let op = match e.node() {
                    Node::Const(c) => Op::Const(rational_to_f64(c)),
                    Node::Coord(name) => match index.get(&**name) {
                        Some(&i) => Op::Var(i),
                        None => return Err(EvalError::UnassignedCoordinate(name.to_string())),
                    },
                    Node::Neg(a) => Op::Neg(s(a)),
                    Node::Add(a, b) => Op::Add(s(a), s(b)),
                    Node::Sub(a, b) => Op::Sub(s(a), s(b)),
                    Node::Mul(a, b) => Op::Mul(s(a), s(b)),
                    Node::Div(a, b) => Op::Div(s(a), s(b)),
                    Node::Pow(a, k) => Op::Pow(s(a), *k),
                    Node::Apply(f, a) => Op::Apply(*f, s(a)),
                };
                slot_of.insert(e.id(), ops.len());
                ops.push(op);
                sources.push(e.clone());
            }
            outputs.push(slot_of[&root.id()]);
        }
        Ok(Tape { ops, sources, outputs, arity: coords.len() })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    fn subtree(&self, slot: usize) -> String {
        let mut text = self.sources[slot].to_string();
        if text.len() > 160 {
            let cut = (0..=160).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
            text.truncate(cut);
            text.push_str("...");
        }
        text
    }

    /// Evaluates every root at the coordinate values `x` (in compile order).
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if x.len() != self.arity {
            return Err(EvalError::PointArity { want: self.arity, got: x.len() });
        }
        let mut v = vec![0.0; self.ops.len()];
        for (slot, op) in self.ops.iter().enumerate() {
            v[slot] = match *op {
                Op::Const(c) => c,
                Op::Var(i) => x[i],
                Op::Neg(a) => -v[a],
                Op::Add(a, b) => v[a] + v[b],
                Op::Sub(a, b) => v[a] - v[b],
                Op::Mul(a, b) => v[a] * v[b],
                Op::Div(a, b) => {
                    if v[b] == 0.0 {
                        return Err(EvalError::DivisionByZero { subtree: self.subtree(slot) });
                    }
                    v[a] / v[b]
                }
                Op::Pow(a, k) => {
                    if k < 0 && v[a] == 0.0 {
                        return Err(EvalError::DivisionByZero { subtree: self.subtree(slot) });
                    }
                    v[a].powi(k)
                }
                Op::Apply(f, a) => match f {
                    Func::Exp => v[a].exp(),
                    Func::Log => {
                        if v[a] <= 0.0 {
                            return Err(EvalError::LogDomain {
                                value: v[a],
                                subtree: self.subtree(slot),
                            });
                        }
                        v[a].ln()
                    }
                    Func::Sin => v[a].sin(),
                    Func::Cos => v[a].cos(),
                },
            };
        }
        Ok(self.outputs.iter().map(|&o| v[o]).collect())
    }
}

/// Handle to one array registered in a [`BatchBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot(usize);

#[derive(Debug, Clone)]
struct SlotInfo {
    offset: usize,
    shape: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct BatchBuilder {
    roots: Vec<Expr>,
    slots: Vec<SlotInfo>,
}

impl BatchBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, array: &ArrayD<Expr>) -> Slot {
        let offset = self.roots.len();
        self.roots.extend(array.iter().cloned());
        self.slots.push(SlotInfo { offset, shape: array.shape().to_vec() });
        Slot(self.slots.len() - 1)
    }

    pub fn add_scalar(&mut self, e: &Expr) -> Slot {
        let offset = self.roots.len();
        self.roots.push(e.clone());
        self.slots.push(SlotInfo { offset, shape: vec![] });
        Slot(self.slots.len() - 1)
    }

    pub fn build<S: AsRef<str>>(self, coords: &[S]) -> Result<Batch, EvalError> {
        let tape = Tape::compile(&self.roots, coords)?;
        Ok(Batch { tape, slots: self.slots })
    }
}

/// Many component arrays compiled into one tape.
#[derive(Debug, Clone)]
pub struct Batch {
    tape: Tape,
    slots: Vec<SlotInfo>,
}

impl Batch {
    pub fn eval(&self, x: &[f64]) -> Result<BatchValues<'_>, EvalError> {
        Ok(BatchValues { data: self.tape.eval(x)?, batch: self })
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }
}

pub struct BatchValues<'a> {
    data: Vec<f64>,
    batch: &'a Batch,
}

impl BatchValues<'_> {
    pub fn view(&self, slot: Slot) -> ArrayViewD<'_, f64> {
        let info = &self.batch.slots[slot.0];
        let len: usize = info.shape.iter().product();
        ArrayViewD::from_shape(IxDyn(&info.shape), &self.data[info.offset..info.offset + len])
            .expect("slot shape matches registered array")
    }

    pub fn array(&self, slot: Slot) -> ArrayD<f64> {
        self.view(slot).to_owned()
    }

    pub fn scalar(&self, slot: Slot) -> f64 {
        self.data[self.batch.slots[slot.0].offset]
    }
}
