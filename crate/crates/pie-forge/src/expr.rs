//! Small floating-point expression evaluator for signal and
//! initial-condition definitions (`sin(10*t)/(10*t + 1e-5)`,
//! `-(pi/2)^2*sin(pi*s/2)`, ...).
//!
//! One free variable, named at parse time (`t` for signals, `s` for
//! initial profiles). Supported: `+ - * / ^`, parentheses, `pi`, `e`, and
//! the functions `sin`, `cos`, `tan`, `exp`, `log`, `sqrt`, `abs`.

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ExprError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone)]
enum Node {
    Const(f64),
    Var,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

/// A compiled scalar expression in one variable.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    pub source: String,
}

impl Expr {
    pub fn parse(src: &str, var: &str) -> Result<Expr, ExprError> {
        let mut p = P {
            src: src.as_bytes(),
            pos: 0,
            var,
        };
        let root = p.expr()?;
        p.ws();
        if p.pos != p.src.len() {
            return Err(ExprError {
                pos: p.pos,
                msg: "unexpected trailing input".into(),
            });
        }
        Ok(Expr {
            root,
            source: src.to_string(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_node(&self.root, x)
    }
}

fn eval_node(n: &Node, x: f64) -> f64 {
    match n {
        Node::Const(c) => *c,
        Node::Var => x,
        Node::Add(a, b) => eval_node(a, x) + eval_node(b, x),
        Node::Sub(a, b) => eval_node(a, x) - eval_node(b, x),
        Node::Mul(a, b) => eval_node(a, x) * eval_node(b, x),
        Node::Div(a, b) => eval_node(a, x) / eval_node(b, x),
        Node::Pow(a, b) => eval_node(a, x).powf(eval_node(b, x)),
        Node::Neg(a) => -eval_node(a, x),
        Node::Call(f, a) => {
            let v = eval_node(a, x);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tan => v.tan(),
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
    }
}

struct P<'a> {
    src: &'a [u8],
    pos: usize,
    var: &'a str,
}

impl<'a> P<'a> {
    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> ExprError {
        ExprError {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Node::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Node::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Node::Mul(Box::new(acc), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = Node::Div(Box::new(acc), Box::new(self.unary()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right-associative; exponent may itself be a unary expression.
            let exp = self.unary()?;
            Ok(Node::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, name, or '('")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // scientific notation
        if self.src.get(self.pos).is_some_and(|&c| c == b'e' || c == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self
                .src
                .get(self.pos)
                .is_some_and(|&c| c == b'+' || c == b'-')
            {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Node::Const)
            .map_err(|_| self.err("malformed number"))
    }

    fn ident(&mut self) -> Result<Node, ExprError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if name == self.var {
            return Ok(Node::Var);
        }
        match name {
            "pi" => Ok(Node::Const(std::f64::consts::PI)),
            "e" => Ok(Node::Const(std::f64::consts::E)),
            "sin" | "cos" | "tan" | "exp" | "log" | "sqrt" | "abs" => {
                let f = match name {
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tan" => Func::Tan,
                    "exp" => Func::Exp,
                    "log" => Func::Log,
                    "sqrt" => Func::Sqrt,
                    _ => Func::Abs,
                };
                if self.peek() != Some(b'(') {
                    return Err(self.err("function call requires parentheses"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(Node::Call(f, Box::new(arg)))
            }
            other => Err(ExprError {
                pos: start,
                msg: format!("unknown name '{other}'"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_functions() {
        let e = Expr::parse("sin(10*t)/(10*t + 1e-5)", "t").unwrap();
        let t: f64 = 0.37;
        let want = (10.0 * t).sin() / (10.0 * t + 1e-5);
        assert!((e.eval(t) - want).abs() < 1e-15);
    }

    #[test]
    fn pi_and_powers() {
        let e = Expr::parse("-(pi/2)^2*sin(pi*s/2)", "s").unwrap();
        let s = 0.5;
        let want = -(std::f64::consts::PI / 2.0).powi(2)
            * (std::f64::consts::PI * s / 2.0).sin();
        assert!((e.eval(s) - want).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Expr::parse("q + 1", "t").is_err());
        assert!(Expr::parse("sin t", "t").is_err());
    }
}
