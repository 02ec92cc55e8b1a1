//! Loop forest, counted-loop detection, node census and copying.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("function has no loop {0}")]
    InvalidLoop(LoopId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopInfo {
    pub loop_id: LoopId,
    pub header: NodeId,
    /// Outermost loops have depth 1.
    pub depth: usize,
    pub parent: Option<LoopId>,
    pub children: Vec<LoopId>,
    /// Every node in the loop subtree, header included, in preorder.
    pub node_ids: Vec<NodeId>,
    pub counted: Option<CountedInfo>,
}

impl LoopInfo {
    pub fn size(&self) -> usize {
        self.node_ids.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Const(i64),
    Dynamic,
}

impl Bound {
    pub fn as_const(self) -> Option<i64> {
        match self {
            Bound::Const(v) => Some(v),
            Bound::Dynamic => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountedInfo {
    pub induction_var: Slot,
    pub init: Bound,
    pub limit: Bound,
    /// Always a positive constant for a counted loop.
    pub step: i64,
    pub const_trip_count: Option<u64>,
}

impl CountedInfo {
    /// True unless the induction variable provably stays in range.
    pub fn can_overflow(&self) -> bool {
        match self.limit {
            // The last value the variable takes is below limit + step.
            Bound::Const(limit) => (limit as i128) + (self.step as i128) - 1 > i64::MAX as i128,
            Bound::Dynamic => true,
        }
    }
}

/// `max(0, ceil((limit - init) / step))` in exact arithmetic.
pub fn trip_count(init: i64, limit: i64, step: i64) -> u64 {
    debug_assert!(step > 0);
    let span = limit as i128 - init as i128;
    if span <= 0 {
        return 0;
    }
    let step = step as i128;
    ((span + step - 1) / step) as u64
}

pub fn find_loops(f: &FunctionIR) -> Vec<LoopInfo> {
    let mut loops = Vec::new();
    collect_loops(f, &f.body, None, 0, &mut loops);
    loops
}

fn collect_loops(
    f: &FunctionIR,
    node: &Node,
    parent: Option<usize>,
    depth: usize,
    out: &mut Vec<LoopInfo>,
) {
    let mut inner_parent = parent;
    let mut inner_depth = depth;
    if let Some(loop_id) = node.loop_id() {
        let mut node_ids = Vec::new();
        node.walk(&mut |n| node_ids.push(n.id));
        let index = out.len();
        out.push(LoopInfo {
            loop_id,
            header: node.id,
            depth: depth + 1,
            parent: parent.map(|p| out[p].loop_id),
            children: Vec::new(),
            node_ids,
            counted: counted_info(f, node, None),
        });
        if let Some(p) = parent {
            out[p].children.push(loop_id);
        }
        inner_parent = Some(index);
        inner_depth = depth + 1;
    }
    // The preceding statement matters for a while loop's initial value.
    if let Op::Block(stmts) = &node.op {
        for (i, s) in stmts.iter().enumerate() {
            if s.is_loop() && i > 0 {
                let before = out.len();
                collect_loops(f, s, inner_parent, inner_depth, out);
                if let Some(info) = out.get_mut(before) {
                    info.counted = counted_info(f, s, Some(&stmts[i - 1]));
                }
            } else {
                collect_loops(f, s, inner_parent, inner_depth, out);
            }
        }
        return;
    }
    for child in node.children() {
        collect_loops(f, child, inner_parent, inner_depth, out);
    }
}

/// Finds the first loop with `loop_id` together with the statement that
/// precedes it in its enclosing block, if any.
fn locate_loop(node: &Node, loop_id: LoopId) -> Option<(&Node, Option<&Node>)> {
    if node.loop_id() == Some(loop_id) {
        return Some((node, None));
    }
    if let Op::Block(stmts) = &node.op {
        for (i, s) in stmts.iter().enumerate() {
            if s.loop_id() == Some(loop_id) {
                return Some((s, if i > 0 { Some(&stmts[i - 1]) } else { None }));
            }
            if let Some(found) = locate_loop(s, loop_id) {
                return Some(found);
            }
        }
        return None;
    }
    node.children()
        .into_iter()
        .find_map(|c| locate_loop(c, loop_id))
}

pub fn detect_counted(f: &FunctionIR, loop_id: LoopId) -> Option<CountedInfo> {
    let (node, prev) = locate_loop(&f.body, loop_id)?;
    counted_info(f, node, prev)
}

/// Variables written and calls made somewhere inside a subtree.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effects {
    pub locals: BTreeSet<Slot>,
    /// Scalar globals assigned and arrays stored to.
    pub globals: BTreeSet<String>,
    pub calls: bool,
}

pub fn effects(node: &Node) -> Effects {
    let mut fx = Effects::default();
    node.walk(&mut |n| match &n.op {
        Op::Let { slot, .. } => {
            fx.locals.insert(*slot);
        }
        Op::Assign { target, .. } => match target {
            Target::Local(s) => {
                fx.locals.insert(*s);
            }
            Target::Global(g) => {
                fx.globals.insert(g.clone());
            }
        },
        Op::For { var, .. } => {
            fx.locals.insert(*var);
        }
        Op::ArrayStore { array, .. } => {
            fx.globals.insert(array.clone());
        }
        Op::Call { .. } => fx.calls = true,
        _ => {}
    });
    fx
}

/// Locals and globals (scalars and arrays) read by a subtree.
pub fn reads(node: &Node) -> (BTreeSet<Slot>, BTreeSet<String>) {
    let mut locals = BTreeSet::new();
    let mut globals = BTreeSet::new();
    node.walk(&mut |n| match &n.op {
        Op::LocalRead(s) => {
            locals.insert(*s);
        }
        Op::GlobalRead(g) | Op::ArrayLoad { array: g, .. } => {
            globals.insert(g.clone());
        }
        _ => {}
    });
    (locals, globals)
}

/// True if `expr` is pure and evaluates to the same value anywhere inside a
/// region with effects `fx`.
pub fn is_invariant(expr: &Node, fx: &Effects) -> bool {
    if !expr.is_pure() {
        return false;
    }
    let (locals, globals) = reads(expr);
    if locals.iter().any(|l| fx.locals.contains(l)) {
        return false;
    }
    if globals.is_empty() {
        return true;
    }
    !fx.calls && globals.iter().all(|g| !fx.globals.contains(g))
}

fn int_const(n: &Node) -> Option<i64> {
    match n.op {
        Op::Const(Value::Int(v)) => Some(v),
        _ => None,
    }
}

fn bound_of(n: &Node) -> Bound {
    int_const(n).map_or(Bound::Dynamic, Bound::Const)
}

/// Matches `iv = iv + C` with a positive integer constant C.
pub(crate) fn increment_of(stmt: &Node) -> Option<(Slot, i64)> {
    if let Op::Assign {
        target: Target::Local(slot),
        value,
    } = &stmt.op
    {
        if let Op::BinOp {
            op: BinaryOp::Add,
            lhs,
            rhs,
        } = &value.op
        {
            if lhs.op == Op::LocalRead(*slot) {
                if let Some(c) = int_const(rhs) {
                    if c > 0 {
                        return Some((*slot, c));
                    }
                }
            }
        }
    }
    None
}

fn counted_info(_f: &FunctionIR, node: &Node, prev: Option<&Node>) -> Option<CountedInfo> {
    match &node.op {
        Op::For {
            var,
            init,
            limit,
            step,
            body,
            ..
        } => {
            let step = int_const(step).filter(|s| *s > 0)?;
            let fx = effects(body);
            if fx.locals.contains(var) {
                return None;
            }
            let mut limit_fx = fx;
            limit_fx.locals.insert(*var);
            if !is_invariant(limit, &limit_fx) {
                return None;
            }
            Some(with_trip_count(*var, bound_of(init), bound_of(limit), step))
        }
        Op::While { cond, body, .. } => {
            let (iv, limit) = match &cond.op {
                Op::BinOp {
                    op: BinaryOp::Lt,
                    lhs,
                    rhs,
                } => match lhs.op {
                    Op::LocalRead(slot) => (slot, rhs.as_ref()),
                    _ => return None,
                },
                _ => return None,
            };
            let stmts = body.block_stmts();
            let (last, rest) = stmts.split_last()?;
            let (slot, step) = increment_of(last)?;
            if slot != iv {
                return None;
            }
            let mut rest_fx = Effects::default();
            for s in rest {
                let fx = effects(s);
                rest_fx.locals.extend(fx.locals);
                rest_fx.globals.extend(fx.globals);
                rest_fx.calls |= fx.calls;
            }
            if rest_fx.locals.contains(&iv) {
                return None;
            }
            rest_fx.locals.insert(iv);
            if !is_invariant(limit, &rest_fx) {
                return None;
            }
            let init = prev
                .and_then(|p| match &p.op {
                    Op::Let { slot, value } if *slot == iv => Some(bound_of(value)),
                    Op::Assign {
                        target: Target::Local(slot),
                        value,
                    } if *slot == iv => Some(bound_of(value)),
                    _ => None,
                })
                .unwrap_or(Bound::Dynamic);
            Some(with_trip_count(iv, init, bound_of(limit), step))
        }
        _ => None,
    }
}

fn with_trip_count(iv: Slot, init: Bound, limit: Bound, step: i64) -> CountedInfo {
    let const_trip_count = match (init, limit) {
        (Bound::Const(i), Bound::Const(l)) => Some(trip_count(i, l, step)),
        _ => None,
    };
    CountedInfo {
        induction_var: iv,
        init,
        limit,
        step,
        const_trip_count,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CensusScope {
    Function,
    Loop(LoopId),
}

pub type Census = BTreeMap<NodeKind, usize>;

pub fn census_of(node: &Node) -> Census {
    let mut counts = Census::new();
    node.walk(&mut |n| *counts.entry(n.kind()).or_insert(0) += 1);
    counts
}

pub fn node_census(f: &FunctionIR, scope: CensusScope) -> Result<Census, AnalysisError> {
    match scope {
        CensusScope::Function => Ok(census_of(&f.body)),
        CensusScope::Loop(id) => f
            .find_loop(id)
            .map(census_of)
            .ok_or(AnalysisError::InvalidLoop(id)),
    }
}

/// Structurally identical copy with fresh node ids (starting past the
/// original's id range) and the original loop ids.
pub fn deep_copy(f: &FunctionIR) -> FunctionIR {
    let mut next = f.next_node_id;
    let body = f.body.copy_with_fresh_ids(&mut next);
    FunctionIR {
        name: f.name.clone(),
        params: f.params.clone(),
        locals: f.locals.clone(),
        body,
        next_node_id: next,
        instrumentation: f.instrumentation.clone(),
    }
}

/// Canonical text of a function, node ids included.
pub fn serialize(f: &FunctionIR) -> String {
    fn go(n: &Node, out: &mut String) {
        use std::fmt::Write;
        write!(out, "({}#{}", n.kind().name(), n.id.0).unwrap();
        match &n.op {
            Op::Let { slot, .. } => write!(out, " s{}", slot.0).unwrap(),
            Op::Assign { target, .. } => match target {
                Target::Local(s) => write!(out, " s{}", s.0).unwrap(),
                Target::Global(g) => write!(out, " g:{g}").unwrap(),
            },
            Op::ArrayStore { array, .. } | Op::ArrayLoad { array, .. } => {
                write!(out, " {array}").unwrap()
            }
            Op::If { peeled_from: Some(l), .. } => write!(out, " peel:{}", l.0).unwrap(),
            Op::While { loop_id, .. } => write!(out, " {loop_id}").unwrap(),
            Op::For { loop_id, var, .. } => write!(out, " {loop_id} s{}", var.0).unwrap(),
            Op::Const(v) => match v {
                Value::Int(i) => write!(out, " i{i}").unwrap(),
                Value::Float(x) => write!(out, " f{:016x}", x.to_bits()).unwrap(),
            },
            Op::LocalRead(s) => write!(out, " s{}", s.0).unwrap(),
            Op::GlobalRead(g) => write!(out, " {g}").unwrap(),
            Op::BinOp { op, .. } => match op {
                BinaryOp::GuardLt { offset } => write!(out, " guard{offset}").unwrap(),
                _ => write!(out, " {}", op.symbol()).unwrap(),
            },
            Op::UnaryOp { op, .. } => write!(out, " {op:?}").unwrap(),
            Op::Call { callee, .. } => write!(out, " {callee}").unwrap(),
            _ => {}
        }
        for c in n.children() {
            out.push(' ');
            go(c, out);
        }
        out.push(')');
    }
    let mut out = format!(
        "fn {}({}) [{}] ",
        f.name,
        f.params.join(","),
        f.locals.join(",")
    );
    go(&f.body, &mut out);
    out
}

/// SHA-256 over `serialize(f)`, hex encoded.
pub fn fingerprint(f: &FunctionIR) -> String {
    Sha256::digest(serialize(f).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
