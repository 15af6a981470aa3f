//! Protocol test double for the execution harness.
//!
//! Speaks the runner wire protocol and interprets a tiny Python subset:
//! single-expression functions (`def f(a, b): return <expr>`) with numeric
//! arithmetic, and tests of the form `assert <expr> == <expr>`. A few body
//! shapes reproduce hostile behavior:
//!
//! - `while True: ...` hangs forever
//! - `raise ...` reports Error
//! - a body mentioning `os._exit` kills the runner process
//! - a body mentioning `sys.stdout.write` emits a non-protocol line
//!
//! Anything it cannot parse is reported as Error.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::time::Instant;

use exrank_core::harness::{RunnerRequest, RunnerResponse};
use exrank_core::Status;

#[derive(Debug, Clone)]
enum Body {
    Return(Expr),
    Hang,
    Raise(String),
    Exit,
    Garbage,
}

#[derive(Debug, Clone)]
struct Function {
    params: Vec<String>,
    body: Body,
}

#[derive(Debug, Clone)]
enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(Box<Expr>, Op, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
        {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(
                text.parse().map_err(|_| format!("SyntaxError: {text}"))?,
            ));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = match two.as_str() {
                "**" => Some("**"),
                "//" => Some("//"),
                "==" => Some("=="),
                _ => None,
            };
            if let Some(s) = sym {
                out.push(Tok::Sym(s));
                i += 2;
                continue;
            }
            let s = match c {
                '+' => "+",
                '-' => "-",
                '*' => "*",
                '/' => "/",
                '%' => "%",
                '(' => "(",
                ')' => ")",
                ',' => ",",
                _ => return Err(format!("SyntaxError: unexpected {c:?}")),
            };
            out.push(Tok::Sym(s));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, String> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn done(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat("+") {
                Op::Add
            } else if self.eat("-") {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("*") {
                Op::Mul
            } else if self.eat("//") {
                Op::FloorDiv
            } else if self.eat("/") {
                Op::Div
            } else if self.eat("%") {
                Op::Mod
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat("+") {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat("**") {
            return Ok(Expr::Bin(Box::new(base), Op::Pow, Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat("(") {
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(")") {
                                break;
                            }
                            if !self.eat(",") {
                                return Err("SyntaxError: expected ',' or ')'".into());
                            }
                        }
                    }
                    Ok(Expr::Call(name, args))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(")") {
                    return Err("SyntaxError: expected ')'".into());
                }
                Ok(e)
            }
            other => Err(format!("SyntaxError: unexpected {other:?}")),
        }
    }
}

fn parse_program(code: &str) -> Result<HashMap<String, Function>, String> {
    let mut funcs = HashMap::new();
    let lines: Vec<&str> = code.lines().collect();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i].trim();
        i += 1;
        let Some(rest) = line.strip_prefix("def ") else {
            if line.is_empty() || line.starts_with('#') || line.starts_with("import ") {
                continue;
            }
            return Err(format!("SyntaxError: unsupported statement {line:?}"));
        };
        let open = rest.find('(').ok_or("SyntaxError: expected '('")?;
        let close = rest.find(')').ok_or("SyntaxError: expected ')'")?;
        let name = rest[..open].trim().to_string();
        let params = rest[open + 1..close]
            .split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        let after = rest[close + 1..].trim();
        let after = after
            .strip_prefix(':')
            .ok_or("SyntaxError: expected ':'")?
            .trim();
        let mut body_text = after.to_string();
        while i < lines.len() && lines[i].starts_with(char::is_whitespace) {
            body_text.push('\n');
            body_text.push_str(lines[i].trim());
            i += 1;
        }
        funcs.insert(
            name,
            Function {
                params,
                body: parse_body(&body_text)?,
            },
        );
    }
    Ok(funcs)
}

fn parse_body(text: &str) -> Result<Body, String> {
    if text.contains("os._exit") {
        return Ok(Body::Exit);
    }
    if text.contains("sys.stdout.write") {
        return Ok(Body::Garbage);
    }
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    if first.starts_with("while True") {
        return Ok(Body::Hang);
    }
    if let Some(r) = first.strip_prefix("raise") {
        return Ok(Body::Raise(r.trim().to_string()));
    }
    if let Some(r) = first.strip_prefix("return ") {
        let mut p = Parser::new(r)?;
        let e = p.expr()?;
        if !p.done() {
            return Err("SyntaxError: trailing tokens".into());
        }
        return Ok(Body::Return(e));
    }
    Err(format!("SyntaxError: unsupported body {first:?}"))
}

enum Halt {
    Error(String),
    Hang,
    Exit,
    Garbage,
}

fn eval(
    e: &Expr,
    env: &HashMap<String, f64>,
    funcs: &HashMap<String, Function>,
) -> Result<f64, Halt> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::Var(name) => *env
            .get(name)
            .ok_or_else(|| Halt::Error(format!("NameError: {name}")))?,
        Expr::Neg(inner) => -eval(inner, env, funcs)?,
        Expr::Bin(l, op, r) => {
            let (a, b) = (eval(l, env, funcs)?, eval(r, env, funcs)?);
            let zero = || Halt::Error("ZeroDivisionError: division by zero".into());
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Pow => a.powf(b),
                Op::Div if b == 0.0 => return Err(zero()),
                Op::Div => a / b,
                Op::FloorDiv if b == 0.0 => return Err(zero()),
                Op::FloorDiv => (a / b).floor(),
                Op::Mod if b == 0.0 => return Err(zero()),
                Op::Mod => a - b * (a / b).floor(),
            }
        }
        Expr::Call(name, args) => {
            let f = funcs
                .get(name)
                .ok_or_else(|| Halt::Error(format!("NameError: {name}")))?;
            if f.params.len() != args.len() {
                return Err(Halt::Error(format!("TypeError: {name} arity")));
            }
            let mut local = HashMap::new();
            for (p, a) in f.params.iter().zip(args) {
                local.insert(p.clone(), eval(a, env, funcs)?);
            }
            match &f.body {
                Body::Return(e) => eval(e, &local, funcs)?,
                Body::Hang => return Err(Halt::Hang),
                Body::Raise(what) => return Err(Halt::Error(format!("raised {what}"))),
                Body::Exit => return Err(Halt::Exit),
                Body::Garbage => return Err(Halt::Garbage),
            }
        }
    })
}

fn judge(req: &RunnerRequest) -> Result<(Status, Option<String>), Halt> {
    let funcs = parse_program(&req.code).map_err(Halt::Error)?;
    let assertion = req
        .test
        .trim()
        .strip_prefix("assert ")
        .ok_or_else(|| Halt::Error("SyntaxError: test is not an assert".into()))?;
    let (lhs, rhs) = assertion
        .split_once("==")
        .ok_or_else(|| Halt::Error("SyntaxError: expected ==".into()))?;
    let parse = |s: &str| -> Result<Expr, Halt> {
        let mut p = Parser::new(s).map_err(Halt::Error)?;
        let e = p.expr().map_err(Halt::Error)?;
        if !p.done() {
            return Err(Halt::Error("SyntaxError: trailing tokens".into()));
        }
        Ok(e)
    };
    let env = HashMap::new();
    let a = eval(&parse(lhs)?, &env, &funcs)?;
    let b = eval(&parse(rhs)?, &env, &funcs)?;
    if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0) {
        Ok((Status::Pass, None))
    } else {
        Ok((Status::Fail, Some(format!("AssertionError: {a} != {b}"))))
    }
}

fn main() {
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let started = Instant::now();
        let (id, status, detail) = match serde_json::from_str::<RunnerRequest>(&line) {
            Err(e) => (
                "unknown".to_string(),
                Status::Error,
                Some(format!("bad request: {e}")),
            ),
            Ok(req) => match judge(&req) {
                Ok((status, detail)) => (req.id, status, detail),
                Err(Halt::Error(msg)) => (req.id, Status::Error, Some(msg)),
                Err(Halt::Hang) => loop {
                    std::thread::sleep(std::time::Duration::from_secs(3600));
                },
                Err(Halt::Exit) => std::process::exit(1),
                Err(Halt::Garbage) => {
                    let _ = writeln!(stdout, "this is not a protocol line");
                    let _ = stdout.flush();
                    continue;
                }
            },
        };
        let resp = RunnerResponse {
            id,
            status,
            duration_ms: started.elapsed().as_millis() as u64,
            detail,
        };
        if stdout.write_all(resp.to_line().as_bytes()).is_err() || stdout.flush().is_err() {
            break;
        }
    }
}
