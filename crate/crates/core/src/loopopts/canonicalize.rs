use crate::lang::analysis::{effects, reads};
use crate::lang::{BinaryOp, FunctionIR, Node, NodeKind, Op, Value};
use crate::runtime::{binary, unary};

/// Constant folding, constant-condition `if` removal, and removal of
/// function-exiting guards made redundant by a peeled first iteration.
pub fn canonicalize(f: &FunctionIR) -> FunctionIR {
    let mut out = f.clone();
    loop {
        let before = out.body.clone();
        fold(&mut out.body);
        prune_ifs(&mut out.body);
        drop_peeled_guards(&mut out.body);
        if out.body == before {
            return out;
        }
    }
}

fn const_of(n: &Node) -> Option<Value> {
    match n.op {
        Op::Const(v) => Some(v),
        _ => None,
    }
}

fn foldable(v: Value) -> bool {
    match v {
        Value::Int(_) => true,
        Value::Float(x) => x.is_finite(),
    }
}

fn fold(node: &mut Node) {
    for c in node.children_mut() {
        fold(c);
    }
    let folded = match &node.op {
        Op::BinOp { op, lhs, rhs } => {
            let (a, b) = (const_of(lhs), const_of(rhs));
            match (op, a, b) {
                (BinaryOp::And, Some(a), _) if !a.truthy() => Some(Value::Int(0)),
                (BinaryOp::Or, Some(a), _) if a.truthy() => Some(Value::Int(1)),
                (_, Some(a), Some(b)) => binary(*op, a, b).ok().filter(|v| foldable(*v)),
                _ => None,
            }
        }
        Op::UnaryOp { op, operand } => const_of(operand).map(|v| unary(*op, v)),
        _ => None,
    };
    if let Some(v) = folded {
        node.op = Op::Const(v);
    }
}

/// Replaces `if` statements with a constant condition by the statements of
/// the branch taken.
fn prune_ifs(node: &mut Node) {
    for c in node.children_mut() {
        prune_ifs(c);
    }
    if let Op::Block(stmts) = &mut node.op {
        let old = std::mem::take(stmts);
        for s in old {
            match s.op {
                Op::If {
                    cond,
                    then_branch,
                    else_branch,
                    peeled_from,
                } => match const_of(&cond) {
                    Some(c) if c.truthy() => splice(stmts, *then_branch),
                    Some(_) => {
                        if let Some(e) = else_branch {
                            splice(stmts, *e);
                        }
                    }
                    None => stmts.push(Node::new(
                        s.id,
                        Op::If {
                            cond,
                            then_branch,
                            else_branch,
                            peeled_from,
                        },
                    )),
                },
                op => stmts.push(Node::new(s.id, op)),
            }
        }
    }
}

fn splice(stmts: &mut Vec<Node>, branch: Node) {
    match branch.op {
        Op::Block(inner) => stmts.extend(inner),
        op => stmts.push(Node::new(branch.id, op)),
    }
}

fn drop_peeled_guards(node: &mut Node) {
    for c in node.children_mut() {
        drop_peeled_guards(c);
    }
    if let Op::Block(stmts) = &mut node.op {
        for i in 1..stmts.len() {
            let (head, tail) = stmts.split_at_mut(i);
            let peeled = &head[i - 1];
            if let Op::If {
                peeled_from: Some(l),
                else_branch: None,
                ..
            } = &peeled.op
            {
                if tail[0].loop_id() == Some(*l) {
                    remove_invariant_exits(&mut tail[0], peeled);
                }
            }
        }
    }
}

/// Once the peeled iteration has run without leaving the function, a guard
/// `if (g) { ... return ...; }` whose condition cannot change inside the
/// loop is known to be false on every later iteration.
fn remove_invariant_exits(lp: &mut Node, peeled: &Node) {
    let Op::If {
        cond: peel_cond,
        then_branch: peel_body,
        ..
    } = &peeled.op
    else {
        return;
    };
    let (body, written) = match &mut lp.op {
        Op::While { cond, body, .. } => {
            if !cond.is_pure() || **cond != **peel_cond {
                return;
            }
            let fx = effects(body);
            (body, fx)
        }
        Op::For {
            var,
            init,
            limit,
            body,
            ..
        } => {
            // The loop must resume exactly where the peeled iteration left off.
            let expected = Op::BinOp {
                op: BinaryOp::Lt,
                lhs: Box::new(Node::new(peel_cond.id, Op::LocalRead(*var))),
                rhs: limit.clone(),
            };
            if init.op != Op::LocalRead(*var) || !limit.is_pure() || peel_cond.op != expected {
                return;
            }
            let mut fx = effects(body);
            fx.locals.insert(*var);
            (body, fx)
        }
        _ => return,
    };
    let peeled_stmts = peel_body.block_stmts();
    if let Op::Block(stmts) = &mut body.op {
        stmts.retain(|s| {
            let Op::If {
                cond,
                then_branch,
                else_branch: None,
                ..
            } = &s.op
            else {
                return true;
            };
            let exits = then_branch
                .block_stmts()
                .iter()
                .any(|t| t.kind() == NodeKind::Return);
            if !exits || !cond.is_pure() || !peeled_stmts.contains(s) {
                return true;
            }
            let (locals, globals) = reads(cond);
            let invariant = locals.is_disjoint(&written.locals)
                && (globals.is_empty() || (!written.calls && globals.is_disjoint(&written.globals)));
            !invariant
        });
    }
}
