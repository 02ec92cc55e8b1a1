//! Structured IR for MiniLang programs.
//!
//! Parsing produces this tree directly; every later stage (loop transforms,
//! feature extraction, instrumentation, execution) works on it. Node ids are
//! unique within a function. Loop ids are assigned once at parse time and
//! survive copying, so a loop duplicated by peeling or unrolling still names
//! the source loop it came from.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::selftime::Instrumentation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoopId(pub u32);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Index of a local variable in its function's frame. Parameters occupy the
/// first slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot(pub u32);

#[derive(Clone, Copy, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
}

impl Value {
    pub fn truthy(self) -> bool {
        match self {
            Value::Int(v) => v != 0,
            Value::Float(v) => v != 0.0,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Float(v) => v,
        }
    }
}

/// Bitwise equality: two floats are equal only if they have the same bits.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
        }
    }
}

/// The node-kind universe. Census features and the cost table are keyed by it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Block,
    Let,
    Assign,
    ArrayStore,
    If,
    While,
    For,
    Return,
    ExprStmt,
    Const,
    LocalRead,
    GlobalRead,
    ArrayLoad,
    BinOp,
    UnaryOp,
    Call,
    Out,
    Pause,
}

impl NodeKind {
    pub const ALL: [NodeKind; 18] = [
        NodeKind::Block,
        NodeKind::Let,
        NodeKind::Assign,
        NodeKind::ArrayStore,
        NodeKind::If,
        NodeKind::While,
        NodeKind::For,
        NodeKind::Return,
        NodeKind::ExprStmt,
        NodeKind::Const,
        NodeKind::LocalRead,
        NodeKind::GlobalRead,
        NodeKind::ArrayLoad,
        NodeKind::BinOp,
        NodeKind::UnaryOp,
        NodeKind::Call,
        NodeKind::Out,
        NodeKind::Pause,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Block => "Block",
            NodeKind::Let => "Let",
            NodeKind::Assign => "Assign",
            NodeKind::ArrayStore => "ArrayStore",
            NodeKind::If => "If",
            NodeKind::While => "While",
            NodeKind::For => "For",
            NodeKind::Return => "Return",
            NodeKind::ExprStmt => "ExprStmt",
            NodeKind::Const => "Const",
            NodeKind::LocalRead => "LocalRead",
            NodeKind::GlobalRead => "GlobalRead",
            NodeKind::ArrayLoad => "ArrayLoad",
            NodeKind::BinOp => "BinOp",
            NodeKind::UnaryOp => "UnaryOp",
            NodeKind::Call => "Call",
            NodeKind::Out => "Out",
            NodeKind::Pause => "Pause",
        }
    }

    /// Pure expression nodes have no fixed position in control flow; they are
    /// the "floating" half of the fixed/floating split.
    pub fn is_floating(self) -> bool {
        matches!(
            self,
            NodeKind::Const
                | NodeKind::LocalRead
                | NodeKind::GlobalRead
                | NodeKind::ArrayLoad
                | NodeKind::BinOp
                | NodeKind::UnaryOp
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    /// `lhs + offset < rhs` evaluated without wrapping. Only emitted by the
    /// unroller; yields false unless both operands are integers.
    GuardLt { offset: i128 },
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::GuardLt { .. } => "__guard_lt",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq | BinaryOp::Ne => 3,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
            BinaryOp::GuardLt { .. } => 8,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Target {
    Local(Slot),
    Global(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Block(Vec<Node>),
    Let {
        slot: Slot,
        value: Box<Node>,
    },
    Assign {
        target: Target,
        value: Box<Node>,
    },
    ArrayStore {
        array: String,
        index: Box<Node>,
        value: Box<Node>,
    },
    If {
        cond: Box<Node>,
        then_branch: Box<Node>,
        else_branch: Option<Box<Node>>,
        /// Set when this `if` guards a peeled first iteration of the loop
        /// that immediately follows it.
        peeled_from: Option<LoopId>,
    },
    While {
        loop_id: LoopId,
        cond: Box<Node>,
        body: Box<Node>,
    },
    /// `for (var = init; var < limit; var += step) body`. Limit and step are
    /// re-evaluated on every iteration.
    For {
        loop_id: LoopId,
        var: Slot,
        init: Box<Node>,
        limit: Box<Node>,
        step: Box<Node>,
        body: Box<Node>,
    },
    Return(Option<Box<Node>>),
    ExprStmt(Box<Node>),
    Const(Value),
    LocalRead(Slot),
    GlobalRead(String),
    ArrayLoad {
        array: String,
        index: Box<Node>,
    },
    BinOp {
        op: BinaryOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Node>,
    },
    Call {
        callee: String,
        args: Vec<Node>,
    },
    Out(Box<Node>),
    Pause(Box<Node>),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub op: Op,
}

/// Structural equality: node ids are ignored, loop ids are not.
impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op
    }
}

impl Node {
    pub fn new(id: NodeId, op: Op) -> Self {
        Node { id, op }
    }

    pub fn kind(&self) -> NodeKind {
        match &self.op {
            Op::Block(_) => NodeKind::Block,
            Op::Let { .. } => NodeKind::Let,
            Op::Assign { .. } => NodeKind::Assign,
            Op::ArrayStore { .. } => NodeKind::ArrayStore,
            Op::If { .. } => NodeKind::If,
            Op::While { .. } => NodeKind::While,
            Op::For { .. } => NodeKind::For,
            Op::Return(_) => NodeKind::Return,
            Op::ExprStmt(_) => NodeKind::ExprStmt,
            Op::Const(_) => NodeKind::Const,
            Op::LocalRead(_) => NodeKind::LocalRead,
            Op::GlobalRead(_) => NodeKind::GlobalRead,
            Op::ArrayLoad { .. } => NodeKind::ArrayLoad,
            Op::BinOp { .. } => NodeKind::BinOp,
            Op::UnaryOp { .. } => NodeKind::UnaryOp,
            Op::Call { .. } => NodeKind::Call,
            Op::Out(_) => NodeKind::Out,
            Op::Pause(_) => NodeKind::Pause,
        }
    }

    pub fn loop_id(&self) -> Option<LoopId> {
        match &self.op {
            Op::While { loop_id, .. } | Op::For { loop_id, .. } => Some(*loop_id),
            _ => None,
        }
    }

    pub fn is_loop(&self) -> bool {
        self.loop_id().is_some()
    }

    /// Direct children in evaluation (and preorder) order.
    pub fn children(&self) -> Vec<&Node> {
        match &self.op {
            Op::Block(stmts) => stmts.iter().collect(),
            Op::Let { value, .. } | Op::Assign { value, .. } => vec![value],
            Op::ArrayStore { index, value, .. } => vec![index, value],
            Op::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let mut out: Vec<&Node> = vec![cond, then_branch];
                if let Some(e) = else_branch {
                    out.push(e);
                }
                out
            }
            Op::While { cond, body, .. } => vec![cond, body],
            Op::For {
                init,
                limit,
                step,
                body,
                ..
            } => vec![init, limit, step, body],
            Op::Return(value) => value.iter().map(|v| v.as_ref()).collect(),
            Op::ExprStmt(e) | Op::Out(e) | Op::Pause(e) => vec![e],
            Op::Const(_) | Op::LocalRead(_) | Op::GlobalRead(_) => Vec::new(),
            Op::ArrayLoad { index, .. } => vec![index],
            Op::BinOp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::UnaryOp { operand, .. } => vec![operand],
            Op::Call { args, .. } => args.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Node> {
        match &mut self.op {
            Op::Block(stmts) => stmts.iter_mut().collect(),
            Op::Let { value, .. } | Op::Assign { value, .. } => vec![value],
            Op::ArrayStore { index, value, .. } => vec![index, value],
            Op::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let mut out: Vec<&mut Node> = vec![cond, then_branch];
                if let Some(e) = else_branch {
                    out.push(e);
                }
                out
            }
            Op::While { cond, body, .. } => vec![cond, body],
            Op::For {
                init,
                limit,
                step,
                body,
                ..
            } => vec![init, limit, step, body],
            Op::Return(value) => value.iter_mut().map(|v| v.as_mut()).collect(),
            Op::ExprStmt(e) | Op::Out(e) | Op::Pause(e) => vec![e],
            Op::Const(_) | Op::LocalRead(_) | Op::GlobalRead(_) => Vec::new(),
            Op::ArrayLoad { index, .. } => vec![index],
            Op::BinOp { lhs, rhs, .. } => vec![lhs, rhs],
            Op::UnaryOp { operand, .. } => vec![operand],
            Op::Call { args, .. } => args.iter_mut().collect(),
        }
    }

    /// Preorder traversal.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Node)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    pub fn walk_mut(&mut self, visit: &mut impl FnMut(&mut Node)) {
        visit(self);
        for child in self.children_mut() {
            child.walk_mut(visit);
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }

    pub fn contains_kind(&self, kind: NodeKind) -> bool {
        let mut found = false;
        self.walk(&mut |n| found |= n.kind() == kind);
        found
    }

    /// Expression with no calls, output or safepoints.
    pub fn is_pure(&self) -> bool {
        let mut pure = true;
        self.walk(&mut |n| {
            if matches!(n.kind(), NodeKind::Call | NodeKind::Out | NodeKind::Pause) {
                pure = false;
            }
        });
        pure
    }

    /// Deep copy with ids drawn from `next`; loop ids are kept.
    pub fn copy_with_fresh_ids(&self, next: &mut u32) -> Node {
        let mut copy = self.clone();
        copy.walk_mut(&mut |n| {
            n.id = NodeId(*next);
            *next += 1;
        });
        copy
    }

    /// Statements of a block node; a non-block node is its own single statement.
    pub fn block_stmts(&self) -> &[Node] {
        match &self.op {
            Op::Block(stmts) => stmts,
            _ => std::slice::from_ref(self),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDecl {
    pub name: String,
    /// `Some(n)` for a fixed-size array of `n` elements.
    pub len: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct FunctionIR {
    pub name: String,
    pub params: Vec<String>,
    /// Slot names; the first `params.len()` entries are the parameters.
    pub locals: Vec<String>,
    pub body: Node,
    pub next_node_id: u32,
    pub instrumentation: Option<Instrumentation>,
}

impl PartialEq for FunctionIR {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.locals == other.locals
            && self.body == other.body
            && self.instrumentation == other.instrumentation
    }
}

impl FunctionIR {
    pub fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_node_id);
        self.next_node_id += 1;
        id
    }

    pub fn node(&mut self, op: Op) -> Node {
        let id = self.fresh_id();
        Node::new(id, op)
    }

    pub fn slot_name(&self, slot: Slot) -> &str {
        &self.locals[slot.0 as usize]
    }

    pub fn slot_of(&self, name: &str) -> Option<Slot> {
        self.locals
            .iter()
            .position(|l| l == name)
            .map(|i| Slot(i as u32))
    }

    pub fn size(&self) -> usize {
        self.body.size()
    }

    pub fn find_loop(&self, loop_id: LoopId) -> Option<&Node> {
        let mut found = None;
        self.body.walk(&mut |n| {
            if found.is_none() && n.loop_id() == Some(loop_id) {
                found = Some(n);
            }
        });
        found
    }

    pub fn loop_ids(&self) -> Vec<LoopId> {
        let mut ids = Vec::new();
        self.body.walk(&mut |n| {
            if let Some(l) = n.loop_id() {
                if !ids.contains(&l) {
                    ids.push(l);
                }
            }
        });
        ids
    }

    pub fn node_by_id(&self, id: NodeId) -> Option<&Node> {
        let mut found = None;
        self.body.walk(&mut |n| {
            if n.id == id {
                found = Some(n);
            }
        });
        found
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionIR>,
    pub entry: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionIR> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut FunctionIR> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn function_map(&self) -> BTreeMap<&str, &FunctionIR> {
        self.functions.iter().map(|f| (f.name.as_str(), f)).collect()
    }
}
