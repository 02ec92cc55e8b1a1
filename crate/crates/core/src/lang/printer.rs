//! MiniLang pretty printer. Output of parsed programs reparses to a
//! structurally equal program.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for g in &p.globals {
        match g.len {
            Some(n) => writeln!(out, "global {}[{}];", g.name, n).unwrap(),
            None => writeln!(out, "global {};", g.name).unwrap(),
        }
    }
    if !p.globals.is_empty() {
        out.push('\n');
    }
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_function(f));
    }
    out
}

pub fn print_function(f: &FunctionIR) -> String {
    let mut out = String::new();
    write!(out, "fn {}({}) ", f.name, f.params.join(", ")).unwrap();
    let mut p = Printer { f, out };
    p.block(&f.body, 0);
    p.out.push('\n');
    p.out
}

/// Renders a single expression, for diagnostics.
pub fn print_expr(f: &FunctionIR, e: &Node) -> String {
    let mut p = Printer {
        f,
        out: String::new(),
    };
    p.expr(e, 0);
    p.out
}

struct Printer<'a> {
    f: &'a FunctionIR,
    out: String,
}

impl Printer<'_> {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
    }

    fn block(&mut self, node: &Node, depth: usize) {
        self.out.push_str("{\n");
        for s in node.block_stmts() {
            self.stmt(s, depth + 1);
        }
        self.indent(depth);
        self.out.push('}');
    }

    fn name(&self, slot: Slot) -> &str {
        self.f.slot_name(slot)
    }

    fn stmt(&mut self, node: &Node, depth: usize) {
        self.indent(depth);
        match &node.op {
            Op::Block(_) => {
                // Nested blocks have no surface syntax; a constant-true `if`
                // keeps the statements grouped.
                self.out.push_str("if (1) ");
                self.block(node, depth);
                self.out.push('\n');
            }
            Op::Let { slot, value } => {
                let name = self.name(*slot).to_string();
                write!(self.out, "let {name} = ").unwrap();
                self.expr(value, 0);
                self.out.push_str(";\n");
            }
            Op::Assign { target, value } => {
                let name = match target {
                    Target::Local(s) => self.name(*s).to_string(),
                    Target::Global(g) => g.clone(),
                };
                write!(self.out, "{name} = ").unwrap();
                self.expr(value, 0);
                self.out.push_str(";\n");
            }
            Op::ArrayStore {
                array,
                index,
                value,
            } => {
                write!(self.out, "{array}[").unwrap();
                self.expr(index, 0);
                self.out.push_str("] = ");
                self.expr(value, 0);
                self.out.push_str(";\n");
            }
            Op::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                self.out.push_str("if (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(then_branch, depth);
                if let Some(e) = else_branch {
                    self.out.push_str(" else ");
                    self.block(e, depth);
                }
                self.out.push('\n');
            }
            Op::While { cond, body, .. } => {
                self.out.push_str("while (");
                self.expr(cond, 0);
                self.out.push_str(") ");
                self.block(body, depth);
                self.out.push('\n');
            }
            Op::For {
                var,
                init,
                limit,
                step,
                body,
                ..
            } => {
                let v = self.name(*var).to_string();
                write!(self.out, "for ({v} = ").unwrap();
                self.expr(init, 0);
                write!(self.out, "; {v} < ").unwrap();
                self.expr(limit, 0);
                write!(self.out, "; {v} += ").unwrap();
                self.expr(step, 0);
                self.out.push_str(") ");
                self.block(body, depth);
                self.out.push('\n');
            }
            Op::Return(value) => {
                self.out.push_str("return");
                if let Some(v) = value {
                    self.out.push(' ');
                    self.expr(v, 0);
                }
                self.out.push_str(";\n");
            }
            Op::ExprStmt(e) => {
                self.expr(e, 0);
                self.out.push_str(";\n");
            }
            _ => {
                self.expr(node, 0);
                self.out.push_str(";\n");
            }
        }
    }

    /// `min_prec` is the loosest operator that can appear unparenthesized.
    fn expr(&mut self, node: &Node, min_prec: u8) {
        match &node.op {
            Op::Const(Value::Int(v)) => {
                if *v == i64::MIN {
                    self.out.push_str("(-9223372036854775807 - 1)");
                } else if *v < 0 {
                    write!(self.out, "(-{})", v.unsigned_abs()).unwrap();
                } else {
                    write!(self.out, "{v}").unwrap();
                }
            }
            Op::Const(Value::Float(v)) => {
                if v.is_sign_negative() {
                    write!(self.out, "(-{:?})", -v).unwrap();
                } else {
                    write!(self.out, "{v:?}").unwrap();
                }
            }
            Op::LocalRead(slot) => {
                let n = self.name(*slot).to_string();
                self.out.push_str(&n);
            }
            Op::GlobalRead(g) => self.out.push_str(g),
            Op::ArrayLoad { array, index } => {
                write!(self.out, "{array}[").unwrap();
                self.expr(index, 0);
                self.out.push(']');
            }
            Op::BinOp {
                op: BinaryOp::GuardLt { offset },
                lhs,
                rhs,
            } => {
                self.out.push_str("__guard_lt(");
                self.expr(lhs, 0);
                self.out.push_str(", ");
                self.expr(rhs, 0);
                write!(self.out, ", {offset})").unwrap();
            }
            Op::BinOp { op, lhs, rhs } => {
                let prec = op.precedence();
                let paren = prec < min_prec;
                if paren {
                    self.out.push('(');
                }
                self.expr(lhs, prec);
                write!(self.out, " {} ", op.symbol()).unwrap();
                self.expr(rhs, prec + 1);
                if paren {
                    self.out.push(')');
                }
            }
            Op::UnaryOp { op, operand } => {
                self.out.push_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                });
                self.expr(operand, 7);
            }
            Op::Call { callee, args } => {
                write!(self.out, "{callee}(").unwrap();
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, 0);
                }
                self.out.push(')');
            }
            Op::Out(e) => {
                self.out.push_str("out(");
                self.expr(e, 0);
                self.out.push(')');
            }
            Op::Pause(e) => {
                self.out.push_str("pause(");
                self.expr(e, 0);
                self.out.push(')');
            }
            _ => {
                write!(self.out, "<{}>", node.kind()).unwrap();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn round_trip_simple_program() {
        let src = "global g; global a[3];\n\
                   fn f(x, y) { let s = -x + y * (2 - 1); a[0] = s; \
                   for (i = 0; i < 3; i += 1) { if (!(i == 1)) { out(a[i]); } else { pause(1); } } \
                   while (s < g) { s = s + 1; } return f(s, 2.5); }";
        let p = parse(src).unwrap();
        let printed = print_program(&p);
        let q = parse(&printed).unwrap();
        assert_eq!(p, q, "{printed}");
    }

    #[test]
    fn right_operand_of_same_precedence_is_parenthesized() {
        let p = parse("fn f(a, b, c) { return a - (b - c); }").unwrap();
        let printed = print_function(&p.functions[0]);
        assert!(printed.contains("a - (b - c)"), "{printed}");
    }
}
