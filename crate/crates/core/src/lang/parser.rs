//! Lexer and recursive-descent parser for MiniLang.
//!
//! Names are resolved while parsing: an identifier is a local if it is a
//! parameter or was introduced by `let` or a `for` header earlier in the
//! function text, and a global otherwise. Node ids and loop ids are assigned
//! in preorder once a function is complete.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(v) => write!(f, "integer `{v}`"),
            Tok::Float(v) => write!(f, "float `{v:?}`"),
            Tok::Kw(k) => write!(f, "`{k}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const KEYWORDS: [&str; 8] = ["global", "fn", "let", "if", "else", "while", "for", "return"];

// Longest first so that `<=` wins over `<`.
const PUNCTS: [&str; 24] = [
    "+=", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", "[", "]", ";", ",", "=", "<",
    ">", "+", "-", "*", "/", "%", "!",
];

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            tokens.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| {
                    err(start_line, start_col, format!("invalid float literal `{text}`"))
                })?)
            } else {
                Tok::Int(text.parse().map_err(|_| {
                    err(
                        start_line,
                        start_col,
                        format!("integer literal `{text}` out of range"),
                    )
                })?)
            };
            tokens.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                tokens.push(Token {
                    tok: Tok::Punct(p),
                    line: start_line,
                    column: start_col,
                });
            }
            None => {
                return Err(err(line, col, format!("unexpected character `{c}`")));
            }
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(tokens)
}

/// Per-function name resolution state.
struct Scope {
    locals: Vec<String>,
    index: HashMap<String, Slot>,
}

impl Scope {
    fn new(params: &[String]) -> Self {
        let mut scope = Scope {
            locals: Vec::new(),
            index: HashMap::new(),
        };
        for p in params {
            scope.declare(p);
        }
        scope
    }

    fn declare(&mut self, name: &str) -> Slot {
        if let Some(slot) = self.index.get(name) {
            return *slot;
        }
        let slot = Slot(self.locals.len() as u32);
        self.locals.push(name.to_string());
        self.index.insert(name.to_string(), slot);
        slot
    }

    fn lookup(&self, name: &str) -> Option<Slot> {
        self.index.get(name).copied()
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Scope,
}

fn placeholder(op: Op) -> Node {
    // Ids are assigned by `number_function` once the function is complete.
    Node::new(NodeId(0), op)
}

#[cfg(test)]
fn boxed(op: Op) -> Box<Node> {
    Box::new(placeholder(op))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &str) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            message: format!("expected {expected}, found {}", t.tok),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.is_punct(p) {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_kw(k) {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(&format!("`{k}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.error_here("identifier")),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut globals: Vec<GlobalDecl> = Vec::new();
        let mut functions: Vec<FunctionIR> = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Kw("global") => {
                    let at = self.tokens[self.pos].clone();
                    let g = self.global()?;
                    if globals.iter().any(|h| h.name == g.name) {
                        return Err(ParseError {
                            line: at.line,
                            column: at.column,
                            message: format!("duplicate global `{}`", g.name),
                        });
                    }
                    globals.push(g);
                }
                Tok::Kw("fn") => {
                    let at = self.tokens[self.pos].clone();
                    let f = self.function()?;
                    if functions.iter().any(|h| h.name == f.name) {
                        return Err(ParseError {
                            line: at.line,
                            column: at.column,
                            message: format!("duplicate function `{}`", f.name),
                        });
                    }
                    functions.push(f);
                }
                _ => return Err(self.error_here("`global` or `fn`")),
            }
        }
        let entry = if functions.iter().any(|f| f.name == "main") {
            "main".to_string()
        } else {
            match functions.first() {
                Some(f) => f.name.clone(),
                None => {
                    return Err(self.error_here("at least one function"));
                }
            }
        };
        Ok(Program {
            globals,
            functions,
            entry,
        })
    }

    fn global(&mut self) -> Result<GlobalDecl, ParseError> {
        self.expect_kw("global")?;
        let name = self.expect_ident()?;
        let mut len = None;
        if self.is_punct("[") {
            self.advance();
            match self.peek().clone() {
                Tok::Int(n) if n > 0 => {
                    self.advance();
                    len = Some(n as usize);
                }
                _ => return Err(self.error_here("positive array length")),
            }
            self.expect_punct("]")?;
        }
        self.expect_punct(";")?;
        Ok(GlobalDecl { name, len })
    }

    fn function(&mut self) -> Result<FunctionIR, ParseError> {
        self.expect_kw("fn")?;
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let p = self.expect_ident()?;
                if params.contains(&p) {
                    let t = &self.tokens[self.pos - 1];
                    return Err(ParseError {
                        line: t.line,
                        column: t.column,
                        message: format!("duplicate parameter `{p}`"),
                    });
                }
                params.push(p);
                if self.is_punct(",") {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.scope = Scope::new(&params);
        let body = self.block()?;
        let locals = std::mem::take(&mut self.scope.locals);
        let mut f = FunctionIR {
            name,
            params,
            locals,
            body,
            next_node_id: 0,
            instrumentation: None,
        };
        number_function(&mut f);
        Ok(f)
    }

    fn block(&mut self) -> Result<Node, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.error_here("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(placeholder(Op::Block(stmts)))
    }

    fn stmt(&mut self) -> Result<Node, ParseError> {
        match self.peek().clone() {
            Tok::Kw("let") => {
                self.advance();
                let name = self.expect_ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                self.expect_punct(";")?;
                let slot = self.scope.declare(&name);
                Ok(placeholder(Op::Let {
                    slot,
                    value: Box::new(value),
                }))
            }
            Tok::Kw("if") => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_branch = self.block()?;
                let else_branch = if self.is_kw("else") {
                    self.advance();
                    Some(Box::new(self.block()?))
                } else {
                    None
                };
                Ok(placeholder(Op::If {
                    cond: Box::new(cond),
                    then_branch: Box::new(then_branch),
                    else_branch,
                    peeled_from: None,
                }))
            }
            Tok::Kw("while") => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                Ok(placeholder(Op::While {
                    loop_id: LoopId(0),
                    cond: Box::new(cond),
                    body: Box::new(body),
                }))
            }
            Tok::Kw("for") => self.for_stmt(),
            Tok::Kw("return") => {
                self.advance();
                let value = if self.is_punct(";") {
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.expect_punct(";")?;
                Ok(placeholder(Op::Return(value)))
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Punct("=")) => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                self.expect_punct(";")?;
                let target = match self.scope.lookup(&name) {
                    Some(slot) => Target::Local(slot),
                    None => Target::Global(name),
                };
                Ok(placeholder(Op::Assign {
                    target,
                    value: Box::new(value),
                }))
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Punct("[")) => {
                self.advance();
                self.advance();
                let index = self.expr()?;
                self.expect_punct("]")?;
                if self.is_punct("=") {
                    self.advance();
                    let value = self.expr()?;
                    self.expect_punct(";")?;
                    return Ok(placeholder(Op::ArrayStore {
                        array: name,
                        index: Box::new(index),
                        value: Box::new(value),
                    }));
                }
                let load = placeholder(Op::ArrayLoad {
                    array: name,
                    index: Box::new(index),
                });
                let e = self.binary(0, Some(load))?;
                self.expect_punct(";")?;
                Ok(placeholder(Op::ExprStmt(Box::new(e))))
            }
            _ => {
                let e = self.expr()?;
                self.expect_punct(";")?;
                Ok(placeholder(Op::ExprStmt(Box::new(e))))
            }
        }
    }

    fn for_stmt(&mut self) -> Result<Node, ParseError> {
        self.expect_kw("for")?;
        self.expect_punct("(")?;
        let var = self.expect_ident()?;
        self.expect_punct("=")?;
        let init = self.expr()?;
        self.expect_punct(";")?;
        let slot = self.scope.declare(&var);
        self.expect_same_ident(&var)?;
        self.expect_punct("<")?;
        let limit = self.expr()?;
        self.expect_punct(";")?;
        self.expect_same_ident(&var)?;
        self.expect_punct("+=")?;
        let step = self.expr()?;
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok(placeholder(Op::For {
            loop_id: LoopId(0),
            var: slot,
            init: Box::new(init),
            limit: Box::new(limit),
            step: Box::new(step),
            body: Box::new(body),
        }))
    }

    fn expect_same_ident(&mut self, var: &str) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Ident(n) if n == var => {
                self.advance();
                Ok(())
            }
            _ => Err(self.error_here(&format!("induction variable `{var}`"))),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.binary(0, None)
    }

    fn peek_binop(&self) -> Option<BinaryOp> {
        let op = match self.peek() {
            Tok::Punct("||") => BinaryOp::Or,
            Tok::Punct("&&") => BinaryOp::And,
            Tok::Punct("==") => BinaryOp::Eq,
            Tok::Punct("!=") => BinaryOp::Ne,
            Tok::Punct("<") => BinaryOp::Lt,
            Tok::Punct("<=") => BinaryOp::Le,
            Tok::Punct(">") => BinaryOp::Gt,
            Tok::Punct(">=") => BinaryOp::Ge,
            Tok::Punct("+") => BinaryOp::Add,
            Tok::Punct("-") => BinaryOp::Sub,
            Tok::Punct("*") => BinaryOp::Mul,
            Tok::Punct("/") => BinaryOp::Div,
            Tok::Punct("%") => BinaryOp::Rem,
            _ => return None,
        };
        Some(op)
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8, first: Option<Node>) -> Result<Node, ParseError> {
        let mut lhs = match first {
            Some(n) => n,
            None => self.unary()?,
        };
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1, None)?;
            lhs = placeholder(Op::BinOp {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            });
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        let op = match self.peek() {
            Tok::Punct("-") => Some(UnaryOp::Neg),
            Tok::Punct("!") => Some(UnaryOp::Not),
            _ => None,
        };
        match op {
            Some(op) => {
                self.advance();
                let operand = self.unary()?;
                Ok(placeholder(Op::UnaryOp {
                    op,
                    operand: Box::new(operand),
                }))
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(placeholder(Op::Const(Value::Int(v))))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(placeholder(Op::Const(Value::Float(v))))
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.advance();
                if self.is_punct("(") {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.is_punct(",") {
                                self.advance();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    return match name.as_str() {
                        "out" | "pause" => {
                            if args.len() != 1 {
                                return Err(ParseError {
                                    line: at.line,
                                    column: at.column,
                                    message: format!(
                                        "`{name}` takes exactly one argument, got {}",
                                        args.len()
                                    ),
                                });
                            }
                            let arg = Box::new(args.pop().unwrap());
                            Ok(placeholder(if name == "out" {
                                Op::Out(arg)
                            } else {
                                Op::Pause(arg)
                            }))
                        }
                        _ => Ok(placeholder(Op::Call { callee: name, args })),
                    };
                }
                if self.is_punct("[") {
                    self.advance();
                    let index = self.expr()?;
                    self.expect_punct("]")?;
                    return Ok(placeholder(Op::ArrayLoad {
                        array: name,
                        index: Box::new(index),
                    }));
                }
                Ok(match self.scope.lookup(&name) {
                    Some(slot) => placeholder(Op::LocalRead(slot)),
                    None => placeholder(Op::GlobalRead(name)),
                })
            }
            _ => Err(self.error_here("expression")),
        }
    }
}

/// Assigns node ids and loop ids in preorder.
pub(crate) fn number_function(f: &mut FunctionIR) {
    let mut next_node = 0u32;
    let mut next_loop = 0u32;
    f.body.walk_mut(&mut |n| {
        n.id = NodeId(next_node);
        next_node += 1;
        match &mut n.op {
            Op::While { loop_id, .. } | Op::For { loop_id, .. } => {
                *loop_id = LoopId(next_loop);
                next_loop += 1;
            }
            _ => {}
        }
    });
    f.next_node_id = next_node;
}

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        scope: Scope::new(&[]),
    };
    parser.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_out() {
        let p = parse("fn main() { out(1); }").unwrap();
        assert_eq!(p.functions.len(), 1);
        let body = &p.functions[0].body;
        let expected = placeholder(Op::Block(vec![placeholder(Op::ExprStmt(boxed(Op::Out(
            boxed(Op::Const(Value::Int(1))),
        ))))]));
        assert_eq!(*body, expected);
        assert_eq!(p.entry, "main");
    }

    #[test]
    fn missing_semicolon_reports_closing_brace() {
        let err = parse("fn main() { let i = 0 }").unwrap_err();
        assert_eq!((err.line, err.column), (1, 23));
        assert!(err.message.contains("`;`"), "{}", err.message);
    }

    #[test]
    fn listing_one_analog_has_one_while_loop() {
        let p = parse("fn foo(n) { let i = n; while (i < g) { i = i + 1; } }").unwrap();
        let f = &p.functions[0];
        assert_eq!(f.loop_ids(), vec![LoopId(0)]);
        let lp = f.find_loop(LoopId(0)).unwrap();
        assert_eq!(lp.kind(), NodeKind::While);
        match &lp.op {
            Op::While { cond, .. } => match &cond.op {
                Op::BinOp { op, lhs, rhs } => {
                    assert_eq!(*op, BinaryOp::Lt);
                    assert_eq!(lhs.op, Op::LocalRead(Slot(1)));
                    assert_eq!(rhs.op, Op::GlobalRead("g".into()));
                }
                other => panic!("unexpected cond {other:?}"),
            },
            _ => unreachable!(),
        }
    }

    #[test]
    fn node_ids_are_preorder() {
        let p = parse("fn f(a) { let x = a + 1; out(x); }").unwrap();
        let mut ids = Vec::new();
        p.functions[0].body.walk(&mut |n| ids.push(n.id.0));
        assert_eq!(ids, (0..ids.len() as u32).collect::<Vec<_>>());
        assert_eq!(p.functions[0].next_node_id as usize, ids.len());
    }

    #[test]
    fn precedence_and_associativity() {
        let p = parse("fn f() { return 1 - 2 - 3 * 4 < 5 && 1 || 0; }").unwrap();
        let printed = crate::lang::printer::print_function(&p.functions[0]);
        assert!(printed.contains("1 - 2 - 3 * 4 < 5 && 1 || 0"), "{printed}");
    }

    #[test]
    fn for_header_must_use_one_variable() {
        let err = parse("fn f() { for (i = 0; j < 3; i += 1) { } }").unwrap_err();
        assert!(err.message.contains("induction variable"), "{}", err.message);
    }

    #[test]
    fn array_statements() {
        let p = parse("global a[4]; fn f() { a[1] = 2; a[1]; a[2] + 1; }").unwrap();
        let stmts = p.functions[0].body.block_stmts();
        assert_eq!(stmts[0].kind(), NodeKind::ArrayStore);
        assert_eq!(stmts[1].kind(), NodeKind::ExprStmt);
        assert_eq!(stmts[2].kind(), NodeKind::ExprStmt);
        assert_eq!(p.global("a").unwrap().len, Some(4));
    }

    #[test]
    fn undeclared_names_resolve_to_globals() {
        let p = parse("fn f(a) { b = a; let c = b; c = 1; }").unwrap();
        let stmts = p.functions[0].body.block_stmts();
        assert!(matches!(&stmts[0].op, Op::Assign { target: Target::Global(g), .. } if g == "b"));
        assert!(matches!(&stmts[2].op, Op::Assign { target: Target::Local(Slot(1)), .. }));
    }

    #[test]
    fn builtin_arity_is_checked() {
        assert!(parse("fn f() { out(1, 2); }").is_err());
        assert!(parse("fn f() { pause(); }").is_err());
    }

    #[test]
    fn duplicate_definitions_rejected() {
        assert!(parse("fn f() {} fn f() {}").is_err());
        assert!(parse("global g; global g; fn f() {}").is_err());
    }

    #[test]
    fn comments_and_floats() {
        let p = parse("// header\nfn f() { out(1.5e2); out(0.25); } // tail").unwrap();
        let mut consts = Vec::new();
        p.functions[0].body.walk(&mut |n| {
            if let Op::Const(v) = n.op {
                consts.push(v);
            }
        });
        assert_eq!(consts, vec![Value::Float(150.0), Value::Float(0.25)]);
    }
}
