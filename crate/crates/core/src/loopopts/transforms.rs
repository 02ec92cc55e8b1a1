use super::{TransformError, UNROLL_FACTORS};
use crate::lang::{detect_counted, BinaryOp, FunctionIR, LoopId, Node, NodeId, Op, Slot, Target};

/// Rewrites every statement-position occurrence of `loop_id` with the
/// statements produced by `build`. Returns the number of occurrences.
fn rewrite_loop(
    node: &mut Node,
    loop_id: LoopId,
    next: &mut u32,
    build: &mut impl FnMut(Node, &mut u32) -> Vec<Node>,
) -> usize {
    let mut hits = 0;
    if let Op::Block(stmts) = &mut node.op {
        let old = std::mem::take(stmts);
        for mut s in old {
            if s.loop_id() == Some(loop_id) {
                stmts.extend(build(s, next));
                hits += 1;
            } else {
                hits += rewrite_loop(&mut s, loop_id, next, build);
                stmts.push(s);
            }
        }
    } else {
        for c in node.children_mut() {
            hits += rewrite_loop(c, loop_id, next, build);
        }
    }
    hits
}

fn mk(next: &mut u32, op: Op) -> Node {
    let id = NodeId(*next);
    *next += 1;
    Node::new(id, op)
}

fn local(next: &mut u32, slot: Slot) -> Node {
    mk(next, Op::LocalRead(slot))
}

/// `var = var + step`
fn increment(next: &mut u32, var: Slot, step: &Node) -> Node {
    let lhs = local(next, var);
    let step = step.copy_with_fresh_ids(next);
    let sum = mk(
        next,
        Op::BinOp {
            op: BinaryOp::Add,
            lhs: Box::new(lhs),
            rhs: Box::new(step),
        },
    );
    mk(
        next,
        Op::Assign {
            target: Target::Local(var),
            value: Box::new(sum),
        },
    )
}

/// Copies the statements of a loop body.
fn body_copy(body: &Node, next: &mut u32) -> Vec<Node> {
    body.block_stmts().iter().map(|s| s.copy_with_fresh_ids(next)).collect()
}

/// Places one guarded copy of the first iteration in front of the loop.
pub fn peel(f: &FunctionIR, loop_id: LoopId) -> Result<FunctionIR, TransformError> {
    let mut out = f.clone();
    let mut next = out.next_node_id;
    let hits = rewrite_loop(&mut out.body, loop_id, &mut next, &mut |lp, next| {
        let lp_id = lp.id;
        match lp.op {
            Op::While { loop_id, cond, body } => {
                let guard_cond = cond.copy_with_fresh_ids(next);
                let stmts = body_copy(&body, next);
                let then_branch = mk(next, Op::Block(stmts));
                let guard = mk(
                    next,
                    Op::If {
                        cond: Box::new(guard_cond),
                        then_branch: Box::new(then_branch),
                        else_branch: None,
                        peeled_from: Some(loop_id),
                    },
                );
                vec![guard, Node::new(lp_id, Op::While { loop_id, cond, body })]
            }
            Op::For {
                loop_id,
                var,
                init,
                limit,
                step,
                body,
            } => {
                let set = mk(
                    next,
                    Op::Assign {
                        target: Target::Local(var),
                        value: init,
                    },
                );
                let lhs = local(next, var);
                let rhs = limit.copy_with_fresh_ids(next);
                let cond = mk(
                    next,
                    Op::BinOp {
                        op: BinaryOp::Lt,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    },
                );
                let mut stmts = body_copy(&body, next);
                stmts.push(increment(next, var, &step));
                let then_branch = mk(next, Op::Block(stmts));
                let guard = mk(
                    next,
                    Op::If {
                        cond: Box::new(cond),
                        then_branch: Box::new(then_branch),
                        else_branch: None,
                        peeled_from: Some(loop_id),
                    },
                );
                let resume = local(next, var);
                let rest = Node::new(
                    lp_id,
                    Op::For {
                        loop_id,
                        var,
                        init: Box::new(resume),
                        limit,
                        step,
                        body,
                    },
                );
                vec![set, guard, rest]
            }
            _ => unreachable!("rewrite_loop only passes loops"),
        }
    });
    if hits == 0 {
        return Err(TransformError::InvalidLoop(loop_id));
    }
    out.next_node_id = next;
    Ok(out)
}

/// Partial unrolling into a main loop running `factor` iterations per trip
/// and a copy of the original loop as epilogue.
pub fn unroll(f: &FunctionIR, loop_id: LoopId, factor: u32) -> Result<FunctionIR, TransformError> {
    if f.find_loop(loop_id).is_none() {
        return Err(TransformError::InvalidLoop(loop_id));
    }
    if factor == 1 {
        return Ok(f.clone());
    }
    if !UNROLL_FACTORS.contains(&factor) {
        return Err(TransformError::InvalidFactor(factor));
    }
    let info = detect_counted(f, loop_id).ok_or(TransformError::NotCounted(loop_id))?;
    let iv = info.induction_var;
    let offset = (factor as i128 - 1) * info.step as i128;
    let mut out = f.clone();
    let mut next = out.next_node_id;
    rewrite_loop(&mut out.body, loop_id, &mut next, &mut |lp, next| {
        let guard = |next: &mut u32, limit: &Node| {
            let lhs = local(next, iv);
            let rhs = limit.copy_with_fresh_ids(next);
            mk(
                next,
                Op::BinOp {
                    op: BinaryOp::GuardLt { offset },
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            )
        };
        match &lp.op {
            Op::While { cond, body, .. } => {
                let Op::BinOp { rhs: limit, .. } = &cond.op else {
                    unreachable!("counted while has a comparison condition")
                };
                let main_cond = guard(next, limit);
                let mut stmts = Vec::new();
                for _ in 0..factor {
                    stmts.extend(body_copy(body, next));
                }
                let main_body = mk(next, Op::Block(stmts));
                let main = mk(
                    next,
                    Op::While {
                        loop_id,
                        cond: Box::new(main_cond),
                        body: Box::new(main_body),
                    },
                );
                vec![main, lp]
            }
            Op::For {
                var,
                init,
                limit,
                step,
                body,
                ..
            } => {
                let set = mk(
                    next,
                    Op::Assign {
                        target: Target::Local(*var),
                        value: init.clone(),
                    },
                );
                let main_cond = guard(next, limit);
                let mut stmts = Vec::new();
                for _ in 0..factor {
                    stmts.extend(body_copy(body, next));
                    stmts.push(increment(next, *var, step));
                }
                let main_body = mk(next, Op::Block(stmts));
                let main = mk(
                    next,
                    Op::While {
                        loop_id,
                        cond: Box::new(main_cond),
                        body: Box::new(main_body),
                    },
                );
                let mut epilogue = lp.clone();
                if let Op::For { init, .. } = &mut epilogue.op {
                    **init = local(next, *var);
                }
                vec![set, main, epilogue]
            }
            _ => unreachable!("rewrite_loop only passes loops"),
        }
    });
    out.next_node_id = next;
    Ok(out)
}
