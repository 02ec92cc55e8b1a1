//! Tree-walking executor for interpreted, compiled and forked code.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use thiserror::Error;

use super::clock::Clock;
use super::cost::CostTable;
use super::profile::Profiles;
use crate::lang::{BinaryOp, FunctionIR, GlobalDecl, Node, NodeId, NodeKind, Op, Program, Target, UnaryOp, Value};
use crate::selftime::{FrameTimer, PerfStorage};

pub const DEFAULT_MAX_DEPTH: usize = 10_000;
pub const DEFAULT_COMPILE_THRESHOLD: u64 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("index {index} out of bounds for `{array}` of length {len}")]
    IndexOutOfBounds { array: String, index: i64, len: usize },
    #[error("unknown global `{0}`")]
    UnknownGlobal(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{function}` expects {expected} arguments, got {got}")]
    ArityMismatch { function: String, expected: usize, got: usize },
    #[error("stack depth exceeds {0} frames")]
    StackOverflow(usize),
    #[error("local `{0}` read before assignment")]
    UninitializedLocal(String),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("pause with negative duration {0}")]
    NegativePause(i64),
}

/// Code installed for a function name.
#[derive(Clone, Debug)]
pub enum Code {
    /// Tier 0: profiled interpretation of the source IR.
    Interpreted(Rc<FunctionIR>),
    /// Optimized IR, no profiling.
    Compiled(Rc<FunctionIR>),
    /// Recombined forks behind a fork-control switch.
    Dispatch(Rc<Dispatcher>),
}

#[derive(Clone, Debug)]
pub struct Dispatcher {
    pub unit_id: usize,
    pub storage_base: usize,
    pub forks: Vec<Rc<FunctionIR>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    Interpreted,
    Compiled,
    Fork,
}

/// Hook invoked when an interpreted function crosses the compile threshold.
pub trait Jit {
    /// Returns the code to install, or `None` to keep interpreting.
    fn compile(&mut self, f: &FunctionIR, profiles: &Profiles, storage: &mut PerfStorage) -> Option<Code>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoJit;

impl Jit for NoJit {
    fn compile(&mut self, _: &FunctionIR, _: &Profiles, _: &mut PerfStorage) -> Option<Code> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExcludedCategory {
    Safepoint,
    Dispatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Cost { frame: usize, kind: NodeKind, cost: u64 },
    Excluded { frame: usize, cost: u64, category: ExcludedCategory },
    RegionOpen { frame: usize, at: u64 },
    RegionClose { frame: usize, at: u64 },
    Exit { frame: usize, local_time: u64, accepted: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameInfo {
    pub function: String,
    pub parent: Option<usize>,
    /// `(unit_id, fork_index)` for fork activations.
    pub fork: Option<(usize, usize)>,
    pub tier: Tier,
}

#[derive(Clone, Debug, Default)]
pub struct ExecTrace {
    pub events: Vec<TraceEvent>,
    pub frames: Vec<FrameInfo>,
    /// Body executions per loop node.
    pub loop_iterations: BTreeMap<(String, NodeId), u64>,
    /// Then-branch executions per `if` node.
    pub branches_taken: BTreeMap<(String, NodeId), u64>,
    pub output: Vec<Value>,
}

impl ExecTrace {
    pub fn loop_iterations_of(&self, function: &str, node: NodeId) -> u64 {
        self.loop_iterations
            .get(&(function.to_string(), node))
            .copied()
            .unwrap_or(0)
    }

    pub fn taken_count(&self, function: &str, node: NodeId) -> u64 {
        self.branches_taken
            .get(&(function.to_string(), node))
            .copied()
            .unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
enum GlobalValue {
    Scalar(Value),
    Array(Vec<Value>),
}

enum Flow {
    Normal,
    Return(Option<Value>),
}

struct Frame {
    id: usize,
    name: Rc<str>,
    locals: Vec<Option<Value>>,
    timer: Option<FrameTimer>,
    profiled: bool,
}

type Res<T> = Result<T, RuntimeError>;

pub struct Machine<J: Jit = NoJit> {
    code: HashMap<String, Code>,
    globals: HashMap<String, GlobalValue>,
    clock: Clock,
    costs: CostTable,
    profiles: Profiles,
    storage: PerfStorage,
    jit: J,
    failed_compiles: BTreeSet<String>,
    compile_threshold: u64,
    max_depth: usize,
    depth: usize,
    next_frame: usize,
    trace: Option<ExecTrace>,
    output: Vec<Value>,
}

impl Machine<NoJit> {
    /// Interpreter without tier-up.
    pub fn interpreter(program: &Program, clock: Clock) -> Self {
        Machine::new(program, clock, NoJit)
    }
}

impl<J: Jit> Machine<J> {
    pub fn new(program: &Program, clock: Clock, jit: J) -> Self {
        let code = program
            .functions
            .iter()
            .map(|f| (f.name.clone(), Code::Interpreted(Rc::new(f.clone()))))
            .collect();
        Machine {
            code,
            globals: init_globals(&program.globals),
            clock,
            costs: CostTable::default(),
            profiles: Profiles::default(),
            storage: PerfStorage::default(),
            jit,
            failed_compiles: BTreeSet::new(),
            compile_threshold: DEFAULT_COMPILE_THRESHOLD,
            max_depth: DEFAULT_MAX_DEPTH,
            depth: 0,
            next_frame: 0,
            trace: None,
            output: Vec::new(),
        }
    }

    pub fn with_compile_threshold(mut self, threshold: u64) -> Self {
        self.compile_threshold = threshold;
        self
    }

    pub fn with_storage(mut self, storage: PerfStorage) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_profiles(mut self, profiles: Profiles) -> Self {
        self.profiles = profiles;
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_cost_table(mut self, costs: CostTable) -> Self {
        self.costs = costs;
        self
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(ExecTrace::default);
    }

    pub fn take_trace(&mut self) -> Option<ExecTrace> {
        self.trace.take().map(|mut t| {
            t.output = self.output.clone();
            t
        })
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn profiles(&self) -> &Profiles {
        &self.profiles
    }

    pub fn profiles_mut(&mut self) -> &mut Profiles {
        &mut self.profiles
    }

    pub fn into_profiles(self) -> Profiles {
        self.profiles
    }

    pub fn storage(&self) -> &PerfStorage {
        &self.storage
    }

    pub fn storage_mut(&mut self) -> &mut PerfStorage {
        &mut self.storage
    }

    pub fn jit(&self) -> &J {
        &self.jit
    }

    pub fn jit_mut(&mut self) -> &mut J {
        &mut self.jit
    }

    pub fn output(&self) -> &[Value] {
        &self.output
    }

    pub fn take_output(&mut self) -> Vec<Value> {
        std::mem::take(&mut self.output)
    }

    pub fn code(&self, name: &str) -> Option<&Code> {
        self.code.get(name)
    }

    pub fn install(&mut self, name: &str, code: Code) {
        self.code.insert(name.to_string(), code);
    }

    pub fn set_global(&mut self, name: &str, value: Value) -> Res<()> {
        match self.globals.get_mut(name) {
            Some(GlobalValue::Scalar(v)) => {
                *v = value;
                Ok(())
            }
            Some(GlobalValue::Array(_)) => Err(RuntimeError::TypeError(format!("`{name}` is an array"))),
            None => Err(RuntimeError::UnknownGlobal(name.to_string())),
        }
    }

    pub fn global(&self, name: &str) -> Option<Value> {
        match self.globals.get(name) {
            Some(GlobalValue::Scalar(v)) => Some(*v),
            _ => None,
        }
    }

    /// Calls `name` from outside any frame. `None` when the function falls off
    /// its end or returns without a value.
    pub fn call(&mut self, name: &str, args: &[Value]) -> Res<Option<Value>> {
        self.depth = 0;
        self.invoke(name, args.to_vec(), None)
    }

    fn invoke(&mut self, name: &str, args: Vec<Value>, parent: Option<usize>) -> Res<Option<Value>> {
        if self.depth >= self.max_depth {
            return Err(RuntimeError::StackOverflow(self.max_depth));
        }
        let mut code = self
            .code
            .get(name)
            .cloned()
            .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
        if let Code::Interpreted(f) = &code {
            if self.profiles.invocations(name) >= self.compile_threshold && !self.failed_compiles.contains(name) {
                match self.jit.compile(f, &self.profiles, &mut self.storage) {
                    Some(c) => {
                        self.code.insert(name.to_string(), c.clone());
                        code = c;
                    }
                    None => {
                        self.failed_compiles.insert(name.to_string());
                    }
                }
            }
        }
        self.depth += 1;
        let result = stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || match &code {
            Code::Interpreted(f) => self.exec_function(f, args, parent, Tier::Interpreted, None),
            Code::Compiled(f) => self.exec_function(f, args, parent, Tier::Compiled, None),
            Code::Dispatch(d) => {
                let n = d.forks.len() as u64;
                let idx = (self.storage.fork_control(d.storage_base) % n) as usize;
                let r = self.exec_function(&d.forks[idx], args, parent, Tier::Fork, Some((d.unit_id, idx)));
                self.storage.bump_fork_control(d.storage_base);
                r
            }
        });
        self.depth -= 1;
        result
    }

    fn exec_function(
        &mut self,
        f: &FunctionIR,
        args: Vec<Value>,
        parent: Option<usize>,
        tier: Tier,
        fork: Option<(usize, usize)>,
    ) -> Res<Option<Value>> {
        if args.len() != f.params.len() {
            return Err(RuntimeError::ArityMismatch {
                function: f.name.clone(),
                expected: f.params.len(),
                got: args.len(),
            });
        }
        let id = self.next_frame;
        self.next_frame += 1;
        if let Some(t) = &mut self.trace {
            t.frames.push(FrameInfo {
                function: f.name.clone(),
                parent,
                fork,
                tier,
            });
        }
        let profiled = tier == Tier::Interpreted;
        if profiled {
            self.profiles.function_mut(&f.name).invocations += 1;
        }
        if fork.is_some() {
            let cost = self.costs.dispatch;
            self.exclude(id, cost, ExcludedCategory::Dispatch);
        }
        let mut locals: Vec<Option<Value>> = vec![None; f.locals.len()];
        for (slot, a) in locals.iter_mut().zip(args) {
            *slot = Some(a);
        }
        let mut frame = Frame {
            id,
            name: Rc::from(f.name.as_str()),
            locals,
            timer: None,
            profiled,
        };
        if f.instrumentation.is_some() {
            frame.timer = Some(FrameTimer::start(self.clock.now()));
            self.trace_event(|| TraceEvent::RegionOpen { frame: id, at: 0 });
        }
        let flow = self.stmt(&f.body, &mut frame)?;
        let value = match flow {
            Flow::Return(v) => v,
            Flow::Normal => None,
        };
        if let (Some(ins), Some(timer)) = (&f.instrumentation, frame.timer.as_mut()) {
            timer.close(self.clock.now());
            let local = timer.accumulated;
            let accepted = self.storage.record_exit(ins.storage_base, ins.fork_index, local, &ins.outlier);
            self.trace_event(|| TraceEvent::RegionClose { frame: id, at: 0 });
            self.trace_event(|| TraceEvent::Exit {
                frame: id,
                local_time: local,
                accepted,
            });
        }
        Ok(value)
    }

    fn trace_event(&mut self, make: impl FnOnce() -> TraceEvent) {
        if self.trace.is_none() {
            return;
        }
        let mut ev = make();
        let now = self.clock.now();
        if let TraceEvent::RegionOpen { at, .. } | TraceEvent::RegionClose { at, .. } = &mut ev {
            *at = now;
        }
        if let Some(t) = &mut self.trace {
            t.events.push(ev);
        }
    }

    fn charge(&mut self, frame: &Frame, kind: NodeKind, cost: u64) {
        self.clock.charge(cost);
        if let Some(t) = &mut self.trace {
            t.events.push(TraceEvent::Cost {
                frame: frame.id,
                kind,
                cost,
            });
        }
    }

    fn charge_node(&mut self, frame: &Frame, kind: NodeKind) {
        let c = self.costs.cost(kind);
        self.charge(frame, kind, c);
    }

    fn exclude(&mut self, frame: usize, cost: u64, category: ExcludedCategory) {
        self.clock.charge(cost);
        if let Some(t) = &mut self.trace {
            t.events.push(TraceEvent::Excluded { frame, cost, category });
        }
    }

    fn close_region(&mut self, frame: &mut Frame) {
        if let Some(timer) = frame.timer.as_mut() {
            timer.close(self.clock.now());
            let id = frame.id;
            self.trace_event(|| TraceEvent::RegionClose { frame: id, at: 0 });
        }
    }

    fn open_region(&mut self, frame: &mut Frame) {
        if let Some(timer) = frame.timer.as_mut() {
            timer.open(self.clock.now());
            let id = frame.id;
            self.trace_event(|| TraceEvent::RegionOpen { frame: id, at: 0 });
        }
    }

    fn stmt(&mut self, node: &Node, frame: &mut Frame) -> Res<Flow> {
        match &node.op {
            Op::Block(stmts) => {
                self.charge_node(frame, NodeKind::Block);
                for s in stmts {
                    if let Flow::Return(v) = self.stmt(s, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            Op::Let { slot, value } => {
                self.charge_node(frame, NodeKind::Let);
                let v = self.expr(value, frame)?;
                frame.locals[slot.0 as usize] = Some(v);
                Ok(Flow::Normal)
            }
            Op::Assign { target, value } => {
                self.charge_node(frame, NodeKind::Assign);
                let v = self.expr(value, frame)?;
                match target {
                    Target::Local(s) => frame.locals[s.0 as usize] = Some(v),
                    Target::Global(g) => self.set_global(g, v)?,
                }
                Ok(Flow::Normal)
            }
            Op::ArrayStore { array, index, value } => {
                self.charge_node(frame, NodeKind::ArrayStore);
                let i = self.expr(index, frame)?;
                let v = self.expr(value, frame)?;
                let (arr, i) = self.array_slot(array, i)?;
                arr[i] = v;
                Ok(Flow::Normal)
            }
            Op::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                self.charge_node(frame, NodeKind::If);
                let taken = self.expr(cond, frame)?.truthy();
                if frame.profiled {
                    let b = self.profiles.function_mut(&frame.name).branches.entry(node.id).or_default();
                    if taken {
                        b.taken += 1;
                    } else {
                        b.not_taken += 1;
                    }
                }
                if taken {
                    if let Some(t) = &mut self.trace {
                        *t.branches_taken.entry((frame.name.to_string(), node.id)).or_insert(0) += 1;
                    }
                    self.stmt(then_branch, frame)
                } else if let Some(e) = else_branch {
                    self.stmt(e, frame)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Op::While { loop_id, cond, body } => {
                let mut iterations = 0u64;
                let flow = loop {
                    self.charge_node(frame, NodeKind::While);
                    if !self.expr(cond, frame)?.truthy() {
                        break Flow::Normal;
                    }
                    iterations += 1;
                    if let Flow::Return(v) = self.stmt(body, frame)? {
                        break Flow::Return(v);
                    }
                };
                self.finish_loop(frame, *loop_id, node.id, iterations);
                Ok(flow)
            }
            Op::For {
                loop_id,
                var,
                init,
                limit,
                step,
                body,
            } => {
                let (init_c, check_c, step_c) = (self.costs.for_init(), self.costs.for_check(), self.costs.for_step());
                self.charge(frame, NodeKind::For, init_c);
                let v = self.expr(init, frame)?;
                let slot = var.0 as usize;
                frame.locals[slot] = Some(v);
                let mut iterations = 0u64;
                let flow = loop {
                    self.charge(frame, NodeKind::For, check_c);
                    let lim = self.expr(limit, frame)?;
                    let cur = self.read_local(frame, slot)?;
                    if !compare(BinaryOp::Lt, cur, lim).truthy() {
                        break Flow::Normal;
                    }
                    iterations += 1;
                    if let Flow::Return(v) = self.stmt(body, frame)? {
                        break Flow::Return(v);
                    }
                    self.charge(frame, NodeKind::For, step_c);
                    let s = self.expr(step, frame)?;
                    let cur = self.read_local(frame, slot)?;
                    frame.locals[slot] = Some(arith(BinaryOp::Add, cur, s)?);
                };
                self.finish_loop(frame, *loop_id, node.id, iterations);
                Ok(flow)
            }
            Op::Return(value) => {
                self.charge_node(frame, NodeKind::Return);
                let v = match value {
                    Some(e) => Some(self.expr(e, frame)?),
                    None => None,
                };
                Ok(Flow::Return(v))
            }
            Op::ExprStmt(e) => {
                self.charge_node(frame, NodeKind::ExprStmt);
                self.expr(e, frame)?;
                Ok(Flow::Normal)
            }
            _ => {
                self.expr(node, frame)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn finish_loop(&mut self, frame: &Frame, loop_id: crate::lang::LoopId, node: NodeId, iterations: u64) {
        if frame.profiled {
            self.profiles
                .function_mut(&frame.name)
                .loops
                .entry(loop_id)
                .or_default()
                .record_entry(iterations);
        }
        if let Some(t) = &mut self.trace {
            *t.loop_iterations.entry((frame.name.to_string(), node)).or_insert(0) += iterations;
        }
    }

    fn read_local(&self, frame: &Frame, slot: usize) -> Res<Value> {
        frame.locals[slot].ok_or_else(|| RuntimeError::UninitializedLocal(format!("#{slot} in {}", frame.name)))
    }

    fn array_slot(&mut self, array: &str, index: Value) -> Res<(&mut Vec<Value>, usize)> {
        let i = match index {
            Value::Int(i) => i,
            Value::Float(_) => return Err(RuntimeError::TypeError("array index must be an integer".into())),
        };
        match self.globals.get_mut(array) {
            Some(GlobalValue::Array(a)) => {
                if i < 0 || i as usize >= a.len() {
                    return Err(RuntimeError::IndexOutOfBounds {
                        array: array.to_string(),
                        index: i,
                        len: a.len(),
                    });
                }
                Ok((a, i as usize))
            }
            Some(GlobalValue::Scalar(_)) => Err(RuntimeError::TypeError(format!("`{array}` is not an array"))),
            None => Err(RuntimeError::UnknownGlobal(array.to_string())),
        }
    }

    fn expr(&mut self, node: &Node, frame: &mut Frame) -> Res<Value> {
        match &node.op {
            Op::Const(v) => {
                self.charge_node(frame, NodeKind::Const);
                Ok(*v)
            }
            Op::LocalRead(s) => {
                self.charge_node(frame, NodeKind::LocalRead);
                self.read_local(frame, s.0 as usize)
            }
            Op::GlobalRead(g) => {
                self.charge_node(frame, NodeKind::GlobalRead);
                match self.globals.get(g.as_str()) {
                    Some(GlobalValue::Scalar(v)) => Ok(*v),
                    Some(GlobalValue::Array(_)) => Err(RuntimeError::TypeError(format!("`{g}` is an array"))),
                    None => Err(RuntimeError::UnknownGlobal(g.clone())),
                }
            }
            Op::ArrayLoad { array, index } => {
                self.charge_node(frame, NodeKind::ArrayLoad);
                let i = self.expr(index, frame)?;
                let (arr, i) = self.array_slot(array, i)?;
                Ok(arr[i])
            }
            Op::BinOp { op, lhs, rhs } => {
                self.charge_node(frame, NodeKind::BinOp);
                let a = self.expr(lhs, frame)?;
                match op {
                    BinaryOp::And if !a.truthy() => return Ok(Value::Int(0)),
                    BinaryOp::Or if a.truthy() => return Ok(Value::Int(1)),
                    _ => {}
                }
                let b = self.expr(rhs, frame)?;
                binary(*op, a, b)
            }
            Op::UnaryOp { op, operand } => {
                self.charge_node(frame, NodeKind::UnaryOp);
                let v = self.expr(operand, frame)?;
                Ok(unary(*op, v))
            }
            Op::Call { callee, args } => {
                self.charge_node(frame, NodeKind::Call);
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.expr(a, frame)?);
                }
                self.close_region(frame);
                let r = self.invoke(callee, values, Some(frame.id))?;
                self.open_region(frame);
                Ok(r.unwrap_or(Value::Int(0)))
            }
            Op::Out(e) => {
                self.charge_node(frame, NodeKind::Out);
                let v = self.expr(e, frame)?;
                self.output.push(v);
                Ok(v)
            }
            Op::Pause(e) => {
                self.charge_node(frame, NodeKind::Pause);
                let n = match self.expr(e, frame)? {
                    Value::Int(n) if n < 0 => return Err(RuntimeError::NegativePause(n)),
                    Value::Int(n) => n as u64,
                    Value::Float(_) => return Err(RuntimeError::TypeError("pause takes an integer".into())),
                };
                self.close_region(frame);
                self.exclude(frame.id, n, ExcludedCategory::Safepoint);
                self.open_region(frame);
                Ok(Value::Int(0))
            }
            _ => {
                // Statements in expression position do not occur in parsed
                // or transformed IR.
                Err(RuntimeError::TypeError(format!("{} is not an expression", node.kind())))
            }
        }
    }
}

fn init_globals(decls: &[GlobalDecl]) -> HashMap<String, GlobalValue> {
    decls
        .iter()
        .map(|g| {
            let v = match g.len {
                Some(n) => GlobalValue::Array(vec![Value::Int(0); n]),
                None => GlobalValue::Scalar(Value::Int(0)),
            };
            (g.name.clone(), v)
        })
        .collect()
}

pub(crate) fn unary(op: UnaryOp, v: Value) -> Value {
    match (op, v) {
        (UnaryOp::Neg, Value::Int(i)) => Value::Int(i.wrapping_neg()),
        (UnaryOp::Neg, Value::Float(x)) => Value::Float(-x),
        (UnaryOp::Not, v) => Value::Int(!v.truthy() as i64),
    }
}

pub(crate) fn binary(op: BinaryOp, a: Value, b: Value) -> Res<Value> {
    match op {
        BinaryOp::Or => Ok(Value::Int((a.truthy() || b.truthy()) as i64)),
        BinaryOp::And => Ok(Value::Int((a.truthy() && b.truthy()) as i64)),
        BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => Ok(compare(op, a, b)),
        BinaryOp::GuardLt { offset } => Ok(match (a, b) {
            (Value::Int(x), Value::Int(y)) => Value::Int(((x as i128) + offset < y as i128) as i64),
            _ => Value::Int(0),
        }),
        _ => arith(op, a, b),
    }
}

fn compare(op: BinaryOp, a: Value, b: Value) -> Value {
    let r = match (a, b) {
        (Value::Int(x), Value::Int(y)) => match op {
            BinaryOp::Eq => x == y,
            BinaryOp::Ne => x != y,
            BinaryOp::Lt => x < y,
            BinaryOp::Le => x <= y,
            BinaryOp::Gt => x > y,
            _ => x >= y,
        },
        _ => {
            let (x, y) = (a.as_f64(), b.as_f64());
            match op {
                BinaryOp::Eq => x == y,
                BinaryOp::Ne => x != y,
                BinaryOp::Lt => x < y,
                BinaryOp::Le => x <= y,
                BinaryOp::Gt => x > y,
                _ => x >= y,
            }
        }
    };
    Value::Int(r as i64)
}

fn arith(op: BinaryOp, a: Value, b: Value) -> Res<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(match op {
            BinaryOp::Add => x.wrapping_add(y),
            BinaryOp::Sub => x.wrapping_sub(y),
            BinaryOp::Mul => x.wrapping_mul(y),
            BinaryOp::Div if y == 0 => return Err(RuntimeError::DivisionByZero),
            BinaryOp::Div => x.wrapping_div(y),
            BinaryOp::Rem if y == 0 => return Err(RuntimeError::DivisionByZero),
            BinaryOp::Rem => x.wrapping_rem(y),
            _ => unreachable!("not arithmetic: {op:?}"),
        })),
        _ => {
            let (x, y) = (a.as_f64(), b.as_f64());
            Ok(Value::Float(match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div if y == 0.0 => return Err(RuntimeError::DivisionByZero),
                BinaryOp::Div => x / y,
                BinaryOp::Rem if y == 0.0 => return Err(RuntimeError::DivisionByZero),
                BinaryOp::Rem => x % y,
                _ => unreachable!("not arithmetic: {op:?}"),
            }))
        }
    }
}
