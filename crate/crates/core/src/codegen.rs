//! GLSL vertex-shader emission.
//!
//! The evolved scalar `d` is added to all three position components:
//! `p = position + vec3(d, d, d)`. Output targets GLSL ES 1.00 (WebGL 1),
//! so there is no `#version` line and inputs use `attribute`/`uniform`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::expr::{format_real, serialize, BinaryOp, Expr, UnaryOp};

/// Guarded division, identical in behavior to the interpreter's `div`.
pub const PDIV_HELPER: &str =
    "float pdiv(float a, float b) { return (abs(b) < 1e-6) ? 1.0 : (a / b); }";

const HEADER: &str = "\
uniform mat4 projectionMatrix;
uniform mat4 modelViewMatrix;
uniform float time;
attribute vec3 position;
";

const BODY_OPEN: &str = "\
void main() {
    float x = position.x;
    float y = position.y;
    float z = position.z;
    float t = time;
";

const BODY_CLOSE: &str = "    vec3 p = position + vec3(d, d, d);
    gl_Position = projectionMatrix * modelViewMatrix * vec4(p, 1.0);
}
";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShaderArtifact {
    pub glsl_source: String,
    /// Human-readable infix, e.g. `x / (x + z)`.
    pub expr_text: String,
    pub dynamic: bool,
    pub expr_sexpr: String,
}

/// Fully parenthesized GLSL expression for `e`.
pub fn emit_expression(e: &Expr) -> String {
    let mut out = String::new();
    write_glsl(e, &mut out);
    out
}

fn write_glsl(e: &Expr, out: &mut String) {
    match e {
        Expr::Binary(BinaryOp::Div, a, b) => {
            out.push_str("pdiv(");
            write_glsl(a, out);
            out.push_str(", ");
            write_glsl(b, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            let sym = match op {
                BinaryOp::Add => " + ",
                BinaryOp::Sub => " - ",
                BinaryOp::Mul => " * ",
                BinaryOp::Div => unreachable!(),
            };
            out.push('(');
            write_glsl(a, out);
            out.push_str(sym);
            write_glsl(b, out);
            out.push(')');
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            out.push_str("(-(");
            write_glsl(a, out);
            out.push_str("))");
        }
        Expr::Unary(op, a) => {
            out.push_str(op.name());
            out.push('(');
            write_glsl(a, out);
            out.push(')');
        }
        Expr::Var(v) => out.push_str(v.name()),
        // Negative literals are parenthesized so `a - -0.5` never lexes as `--`.
        Expr::Const(c) if c.is_sign_negative() => write!(out, "({})", format_real(*c)).unwrap(),
        Expr::Const(c) => out.push_str(&format_real(*c)),
    }
}

/// Complete vertex shader for `e`.
pub fn emit_shader(e: &Expr) -> ShaderArtifact {
    let mut src = String::with_capacity(512);
    src.push_str(HEADER);
    if e.contains_div() {
        src.push_str(PDIV_HELPER);
        src.push('\n');
    }
    src.push_str(BODY_OPEN);
    writeln!(src, "    float d = {};", emit_expression(e)).unwrap();
    src.push_str(BODY_CLOSE);
    ShaderArtifact {
        glsl_source: src,
        expr_text: e.to_string(),
        dynamic: e.is_dynamic(),
        expr_sexpr: serialize(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio_tree() -> Expr {
        Expr::div(Expr::x(), Expr::add(Expr::x(), Expr::z()))
    }

    #[test]
    fn expression_forms() {
        assert_eq!(emit_expression(&ratio_tree()), "pdiv(x, (x + z))");
        assert_eq!(emit_expression(&Expr::neg(Expr::constant(0.5))), "(-(0.5))");
        assert_eq!(emit_expression(&Expr::sin(Expr::t())), "sin(t)");
        assert_eq!(emit_expression(&Expr::cos(Expr::y())), "cos(y)");
        assert_eq!(
            emit_expression(&Expr::sub(Expr::x(), Expr::constant(-0.25))),
            "(x - (-0.25))"
        );
        assert_eq!(emit_expression(&Expr::mul(Expr::constant(0.0), Expr::z())), "(0.0 * z)");
    }

    #[test]
    fn ratio_tree_shader_matches_template() {
        let art = emit_shader(&ratio_tree());
        let expected = "\
uniform mat4 projectionMatrix;
uniform mat4 modelViewMatrix;
uniform float time;
attribute vec3 position;
float pdiv(float a, float b) { return (abs(b) < 1e-6) ? 1.0 : (a / b); }
void main() {
    float x = position.x;
    float y = position.y;
    float z = position.z;
    float t = time;
    float d = pdiv(x, (x + z));
    vec3 p = position + vec3(d, d, d);
    gl_Position = projectionMatrix * modelViewMatrix * vec4(p, 1.0);
}
";
        assert_eq!(art.glsl_source, expected);
        assert_eq!(art.expr_text, "x / (x + z)");
        assert_eq!(art.expr_sexpr, "(div x (add x z))");
        assert!(!art.dynamic);
    }

    #[test]
    fn no_helper_without_div() {
        let art = emit_shader(&Expr::sin(Expr::t()));
        assert!(!art.glsl_source.contains("pdiv"));
        assert!(art.dynamic);
        assert_eq!(art.glsl_source.matches("float d = ").count(), 1);
    }

    #[test]
    fn zero_constant_is_identity_displacement() {
        let art = emit_shader(&Expr::constant(0.0));
        assert!(art.glsl_source.contains("    float d = 0.0;\n"));
        assert!(art.glsl_source.contains("vec3 p = position + vec3(d, d, d);"));
    }
}
