//! Loop feature vectors, extracted from the intermediate compilation right
//! before a loop decision is applied.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{
    census_of, find_loops, BinaryOp, FunctionIR, LoopId, Node, NodeKind, Op, Slot, Target, UnaryOp, Value,
};
use crate::runtime::Profiles;

pub const SCHEMA_VERSION: &str = "forklab-features-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    General,
    Execution,
    Nodes,
    Edges,
    Operands,
    Parent,
    Graph,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSchema {
    pub version: &'static str,
    pub features: Vec<(String, Category)>,
}

impl FeatureSchema {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|(n, _)| n == name)
    }
}

pub fn schema() -> FeatureSchema {
    use Category::*;
    let mut features: Vec<(String, Category)> = Vec::new();
    let mut add = |names: &[&str], c: Category| {
        features.extend(names.iter().map(|n| (n.to_string(), c)));
    };
    add(
        &["size", "depth", "is_nested", "n_children", "n_backedges", "n_exits", "is_vectorizable"],
        General,
    );
    add(
        &["frequency", "profiled", "has_exact_trip_count", "has_max_trip_count", "can_overflow"],
        Execution,
    );
    add(&["fixed_nodes", "floating_nodes"], Nodes);
    for k in NodeKind::ALL {
        features.push((format!("loop_count_{}", k.name()), Nodes));
    }
    let mut add = |names: &[&str], c: Category| {
        features.extend(names.iter().map(|n| (n.to_string(), c)));
    };
    add(&["values_into_loop", "values_in_loop", "values_out_of_loop"], Edges);
    add(
        &[
            "object_stamps",
            "int_ops",
            "float_ops",
            "volatile_field_accesses",
            "static_field_reads",
            "static_field_writes",
        ],
        Operands,
    );
    add(&["has_parent", "parent_size"], Parent);
    add(&["graph_size", "graph_loops", "graph_max_loop_depth", "graph_branches"], Graph);
    for k in NodeKind::ALL {
        features.push((format!("graph_count_{}", k.name()), Graph));
    }
    FeatureSchema {
        version: SCHEMA_VERSION,
        features,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_version: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        schema().index_of(name).and_then(|i| self.values.get(i).copied())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("function has no loop {0}")]
    InvalidLoop(LoopId),
}

fn b(x: bool) -> f64 {
    x as u8 as f64
}

pub fn extract(f: &FunctionIR, loop_id: LoopId, profiles: &Profiles) -> Result<FeatureVector, FeatureError> {
    let loops = find_loops(f);
    let info = loops
        .iter()
        .find(|l| l.loop_id == loop_id)
        .ok_or(FeatureError::InvalidLoop(loop_id))?;
    let node = f.find_loop(loop_id).ok_or(FeatureError::InvalidLoop(loop_id))?;
    let body_fx = crate::lang::analysis::effects(node);
    let loop_census = census_of(node);
    let graph_census = census_of(&f.body);
    let count = |c: &BTreeMap<NodeKind, usize>, k: NodeKind| c.get(&k).copied().unwrap_or(0) as f64;

    let mut values = BTreeMap::<String, f64>::new();
    let mut set = |name: &str, v: f64| {
        values.insert(name.to_string(), v);
    };

    // General
    let has_output_effects = node.contains_kind(NodeKind::Call) || node.contains_kind(NodeKind::Pause);
    set("size", info.size() as f64);
    set("depth", info.depth as f64);
    set("is_nested", b(info.parent.is_some()));
    set("n_children", info.children.len() as f64);
    set("n_backedges", 1.0);
    set("n_exits", count(&loop_census, NodeKind::Return) + 1.0);
    set(
        "is_vectorizable",
        b(info.counted.is_some() && !has_output_effects && body_fx.globals.is_empty()),
    );

    // Execution
    let freq = profiles.loop_frequency(&f.name, loop_id);
    set("frequency", freq.clone().unwrap_or(0.0));
    set("profiled", b(freq.is_ok()));
    set(
        "has_exact_trip_count",
        b(info.counted.as_ref().is_some_and(|c| c.const_trip_count.is_some())),
    );
    set("has_max_trip_count", b(freq.is_ok()));
    set("can_overflow", b(info.counted.as_ref().is_none_or(|c| c.can_overflow())));

    // Nodes
    let floating: usize = loop_census.iter().filter(|(k, _)| k.is_floating()).map(|(_, n)| n).sum();
    set("fixed_nodes", (info.size() - floating) as f64);
    set("floating_nodes", floating as f64);
    for k in NodeKind::ALL {
        set(&format!("loop_count_{}", k.name()), count(&loop_census, k));
    }

    // Edges
    let (into, inside, out) = liveness(f, node);
    set("values_into_loop", into as f64);
    set("values_in_loop", inside as f64);
    set("values_out_of_loop", out as f64);

    // Operands
    let floats = float_locals(f);
    let (mut int_ops, mut float_ops, mut reads, mut writes) = (0, 0, 0, 0);
    node.walk(&mut |n| match &n.op {
        Op::BinOp { op, lhs, rhs } if op.is_arithmetic() => {
            if is_float(lhs, &floats) || is_float(rhs, &floats) {
                float_ops += 1;
            } else {
                int_ops += 1;
            }
        }
        Op::UnaryOp {
            op: UnaryOp::Neg,
            operand,
        } => {
            if is_float(operand, &floats) {
                float_ops += 1;
            } else {
                int_ops += 1;
            }
        }
        Op::GlobalRead(_) | Op::ArrayLoad { .. } => reads += 1,
        Op::Assign {
            target: Target::Global(_),
            ..
        }
        | Op::ArrayStore { .. } => writes += 1,
        _ => {}
    });
    set("object_stamps", 0.0);
    set("int_ops", int_ops as f64);
    set("float_ops", float_ops as f64);
    set("volatile_field_accesses", 0.0);
    set("static_field_reads", reads as f64);
    set("static_field_writes", writes as f64);

    // Parent
    let parent_size = info
        .parent
        .and_then(|p| loops.iter().find(|l| l.loop_id == p))
        .map_or(0, |p| p.size());
    set("has_parent", b(info.parent.is_some()));
    set("parent_size", parent_size as f64);

    // Graph
    set("graph_size", f.size() as f64);
    set("graph_loops", loops.len() as f64);
    set("graph_max_loop_depth", loops.iter().map(|l| l.depth).max().unwrap_or(0) as f64);
    set("graph_branches", count(&graph_census, NodeKind::If));
    for k in NodeKind::ALL {
        set(&format!("graph_count_{}", k.name()), count(&graph_census, k));
    }

    let s = schema();
    let values = s
        .features
        .iter()
        .map(|(name, _)| values.get(name).copied().expect("every schema feature is filled"))
        .collect();
    Ok(FeatureVector {
        schema_version: SCHEMA_VERSION.to_string(),
        values,
    })
}

/// Locals that are ever assigned a float-valued expression.
fn float_locals(f: &FunctionIR) -> BTreeSet<Slot> {
    let mut floats = BTreeSet::new();
    loop {
        let before = floats.len();
        f.body.walk(&mut |n| match &n.op {
            Op::Let { slot, value }
            | Op::Assign {
                target: Target::Local(slot),
                value,
            }
                if is_float(value, &floats) => {
                    floats.insert(*slot);
                }
            _ => {}
        });
        if floats.len() == before {
            return floats;
        }
    }
}

/// Static guess at whether an expression produces a float.
fn is_float(e: &Node, floats: &BTreeSet<Slot>) -> bool {
    match &e.op {
        Op::Const(Value::Float(_)) => true,
        Op::LocalRead(s) => floats.contains(s),
        Op::BinOp { op, lhs, rhs } if op.is_arithmetic() => is_float(lhs, floats) || is_float(rhs, floats),
        Op::BinOp {
            op: BinaryOp::GuardLt { .. },
            ..
        } => false,
        Op::UnaryOp {
            op: UnaryOp::Neg,
            operand,
        } => is_float(operand, floats),
        Op::Out(x) => is_float(x, floats),
        _ => false,
    }
}

/// Local-variable coupling between a loop and the rest of its function,
/// using textual (preorder) positions.
fn liveness(f: &FunctionIR, lp: &Node) -> (usize, usize, usize) {
    let mut pos = 0usize;
    let (mut start, mut end) = (usize::MAX, usize::MAX);
    let mut reads: BTreeMap<Slot, Vec<usize>> = BTreeMap::new();
    let mut writes: BTreeMap<Slot, Vec<usize>> = BTreeMap::new();
    let lp_id = lp.id;
    fn go(
        n: &Node,
        pos: &mut usize,
        lp_id: crate::lang::NodeId,
        range: &mut (usize, usize),
        reads: &mut BTreeMap<Slot, Vec<usize>>,
        writes: &mut BTreeMap<Slot, Vec<usize>>,
    ) {
        let here = *pos;
        *pos += 1;
        if n.id == lp_id {
            range.0 = here;
        }
        match &n.op {
            Op::LocalRead(s) => reads.entry(*s).or_default().push(here),
            Op::Let { slot, .. }
            | Op::Assign {
                target: Target::Local(slot),
                ..
            } => writes.entry(*slot).or_default().push(here),
            Op::For { var, .. } => {
                writes.entry(*var).or_default().push(here);
                reads.entry(*var).or_default().push(here);
            }
            _ => {}
        }
        for c in n.children() {
            go(c, pos, lp_id, range, reads, writes);
        }
        if n.id == lp_id {
            range.1 = *pos;
        }
    }
    let mut range = (start, end);
    go(&f.body, &mut pos, lp_id, &mut range, &mut reads, &mut writes);
    (start, end) = range;
    let inside = |p: &usize| *p >= start && *p < end;
    let n_params = f.params.len() as u32;
    let slots: BTreeSet<Slot> = reads.keys().chain(writes.keys()).copied().collect();
    let (mut into, mut in_loop, mut out) = (0, 0, 0);
    for s in slots {
        let r = reads.get(&s).map(Vec::as_slice).unwrap_or(&[]);
        let w = writes.get(&s).map(Vec::as_slice).unwrap_or(&[]);
        let defined_before = s.0 < n_params || w.iter().any(|p| *p < start);
        let defined_inside = w.iter().any(inside);
        if r.iter().any(inside) && defined_before {
            into += 1;
        }
        if defined_inside {
            if r.iter().any(|p| *p >= end) {
                out += 1;
            } else if !defined_before && r.iter().all(inside) {
                in_loop += 1;
            }
        }
    }
    (into, in_loop, out)
}
