//! Test-only oracles, independent of the code paths they check.
#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::Value;
use shaderevo::api::{router, AppState};
use shaderevo::store::Store;
use tower::ServiceExt;

/// Evaluates emitted GLSL expression text with an ordinary precedence-climbing
/// parser. Knows `pdiv`, `sin`, `cos`, unary minus and the four infix
/// operators; every operation result is clamped to the finite range.
pub fn eval_glsl_infix(src: &str, x: f64, y: f64, z: f64, t: f64) -> Result<f64, String> {
    let tokens = lex(src)?;
    let mut p = InfixParser { tokens, pos: 0, vars: [x, y, z, t] };
    let v = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(format!("trailing tokens at {}", p.pos));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| format!("bad number {text}"))?));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected char {c:?}"));
        }
    }
    Ok(out)
}

fn clamp(v: f64) -> f64 {
    if v > f64::MAX {
        f64::MAX
    } else if v < -f64::MAX {
        -f64::MAX
    } else {
        v
    }
}

struct InfixParser {
    tokens: Vec<Tok>,
    pos: usize,
    vars: [f64; 4],
}

impl InfixParser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> Result<(), String> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(o)) if *o == c => {
                self.pos += 1;
                Ok(())
            }
            other => Err(format!("expected {c:?}, got {other:?}")),
        }
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Op('+')) => {
                    self.pos += 1;
                    acc = clamp(acc + self.term()?);
                }
                Some(Tok::Op('-')) => {
                    self.pos += 1;
                    acc = clamp(acc - self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    acc = clamp(acc * self.unary()?);
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    acc = clamp(acc / self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(clamp(-self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<f64, String> {
        let tok = self.tokens.get(self.pos).cloned().ok_or("unexpected end")?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(v),
            Tok::Op('(') => {
                let v = self.expr()?;
                self.eat(')')?;
                Ok(v)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(self.vars[0]),
                "y" => Ok(self.vars[1]),
                "z" => Ok(self.vars[2]),
                "t" => Ok(self.vars[3]),
                "sin" | "cos" => {
                    self.eat('(')?;
                    let a = self.expr()?;
                    self.eat(')')?;
                    Ok(clamp(if name == "sin" { a.sin() } else { a.cos() }))
                }
                "pdiv" => {
                    self.eat('(')?;
                    let a = self.expr()?;
                    self.eat(',')?;
                    let b = self.expr()?;
                    self.eat(')')?;
                    Ok(clamp(if b.abs() < 1e-6 { 1.0 } else { a / b }))
                }
                other => Err(format!("unknown identifier {other}")),
            },
            other => Err(format!("unexpected token {other:?}")),
        }
    }
}

/// The default 375-point lattice, rebuilt by hand.
pub fn lattice_points() -> Vec<[f64; 4]> {
    let axis = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut pts = Vec::new();
    for x in axis {
        for y in axis {
            for z in axis {
                for t in [0.0, 1.0, 2.0] {
                    pts.push([x, y, z, t]);
                }
            }
        }
    }
    pts
}

/// Brute-force capped least-squares distance over [`lattice_points`].
pub fn brute_distance(a: &shaderevo::expr::Expr, b: &shaderevo::expr::Expr) -> f64 {
    use shaderevo::expr::EvalPoint;
    let mut sum = 0.0;
    for [x, y, z, t] in lattice_points() {
        let p = EvalPoint::new(x, y, z, t);
        let d = a.evaluate(&p) - b.evaluate(&p);
        sum += (d * d).min(1e6);
    }
    sum
}

/// In-process HTTP harness over the full router.
pub struct TestServer {
    pub state: Arc<AppState>,
    app: axum::Router,
    _dir: Option<tempfile::TempDir>,
}

impl TestServer {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut server = TestServer::with_state(Arc::new(AppState::new(store)));
        server._dir = Some(dir);
        server
    }

    pub fn with_state(state: Arc<AppState>) -> Self {
        TestServer { app: router(state.clone(), None), state, _dir: None }
    }

    pub async fn request(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut builder = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                builder = builder.header("content-type", "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(builder.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
        (status, value)
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.request(Method::POST, uri, Some(body)).await
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.request(Method::GET, uri, None).await
    }
}

/// Checks the documented error body shape.
pub fn is_error_body(v: &Value) -> bool {
    v.as_object().is_some_and(|o| {
        o.len() == 2 && o.get("error").is_some_and(Value::is_string) && o.get("detail").is_some_and(Value::is_string)
    })
}

/// Checks one candidates array: slots 0..k in order, glsl re-emits from
/// sexpr, dynamic flag tracks the time terminal.
pub fn check_candidates(v: &Value, k: usize) -> Result<(), String> {
    let arr = v.as_array().ok_or("candidates is not an array")?;
    if arr.len() != k {
        return Err(format!("expected {k} candidates, got {}", arr.len()));
    }
    for (i, c) in arr.iter().enumerate() {
        let obj = c.as_object().ok_or("candidate is not an object")?;
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        if keys != ["dynamic", "expr", "glsl", "sexpr", "slot"] {
            return Err(format!("unexpected candidate keys {keys:?}"));
        }
        if c["slot"].as_u64() != Some(i as u64) {
            return Err(format!("slot {} at position {i}", c["slot"]));
        }
        let sexpr = c["sexpr"].as_str().ok_or("sexpr not a string")?;
        let tree = shaderevo::expr::deserialize(sexpr).map_err(|e| e.to_string())?;
        let art = shaderevo::codegen::emit_shader(&tree);
        if c["glsl"].as_str() != Some(art.glsl_source.as_str()) {
            return Err(format!("glsl mismatch for {sexpr}"));
        }
        if c["expr"].as_str() != Some(art.expr_text.as_str()) {
            return Err(format!("expr text mismatch for {sexpr}"));
        }
        let has_t = sexpr.split(|ch: char| ch == '(' || ch == ')' || ch == ' ').any(|tok| tok == "t");
        if c["dynamic"].as_bool() != Some(has_t) {
            return Err(format!("dynamic flag wrong for {sexpr}"));
        }
    }
    Ok(())
}
