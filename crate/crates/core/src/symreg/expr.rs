//! Expression trees over `(t, l1, l2, l3)` with guarded evaluation.
//!
//! Division by a near-zero denominator yields a large sentinel and marks
//! the evaluation invalid; exponent arguments are clamped at 50. Both
//! guards keep evaluation total over finite inputs.

use serde::{Deserialize, Serialize};

/// Denominators below this magnitude trip the division guard.
pub const DIV_GUARD: f64 = 1e-12;
/// Value produced by a tripped division guard.
pub const SENTINEL: f64 = 1e300;
/// Upper clamp for exponent arguments.
pub const EXP_CLAMP: f64 = 50.0;

/// Input variables, in row order `(t, l1, l2, l3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Var {
    T,
    L1,
    L2,
    L3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::T, Var::L1, Var::L2, Var::L3];

    pub fn index(&self) -> usize {
        match self {
            Var::T => 0,
            Var::L1 => 1,
            Var::L2 => 2,
            Var::L3 => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Var::T => "t",
            Var::L1 => "l1",
            Var::L2 => "l2",
            Var::L3 => "l3",
        }
    }
}

/// Symbolic expression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::Sin(Box::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::Cos(Box::new(a))
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                vec![a, b]
            }
            Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => vec![a],
        }
    }

    /// Total node count; with unit operator weights this is the complexity.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Tree depth; a single leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .iter()
            .map(|c| c.depth())
            .max()
            .unwrap_or(0)
    }

    /// Subtree at preorder index `idx` (root is 0).
    pub fn get(&self, idx: usize) -> Option<&Expr> {
        fn walk<'a>(node: &'a Expr, idx: &mut usize) -> Option<&'a Expr> {
            if *idx == 0 {
                return Some(node);
            }
            *idx -= 1;
            for child in node.children() {
                if let Some(found) = walk(child, idx) {
                    return Some(found);
                }
            }
            None
        }
        let mut i = idx;
        walk(self, &mut i)
    }

    /// Replace the subtree at preorder index `idx`; returns false if the
    /// index is out of range.
    pub fn replace(&mut self, idx: usize, new: Expr) -> bool {
        fn walk(node: &mut Expr, idx: &mut usize, new: &mut Option<Expr>) -> bool {
            if *idx == 0 {
                *node = new.take().expect("single use");
                return true;
            }
            *idx -= 1;
            let children: Vec<&mut Expr> = match node {
                Expr::Const(_) | Expr::Var(_) => vec![],
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    vec![a.as_mut(), b.as_mut()]
                }
                Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => vec![a.as_mut()],
            };
            for child in children {
                if walk(child, idx, new) {
                    return true;
                }
            }
            false
        }
        let mut i = idx;
        walk(self, &mut i, &mut Some(new))
    }

    /// Depth (1-based) of the node at preorder index `idx`.
    pub fn depth_of(&self, idx: usize) -> Option<usize> {
        fn walk(node: &Expr, idx: &mut usize, depth: usize) -> Option<usize> {
            if *idx == 0 {
                return Some(depth);
            }
            *idx -= 1;
            for child in node.children() {
                if let Some(d) = walk(child, idx, depth + 1) {
                    return Some(d);
                }
            }
            None
        }
        let mut i = idx;
        walk(self, &mut i, 1)
    }

    /// Preorder indices of all `Const` nodes.
    pub fn const_indices(&self) -> Vec<usize> {
        fn walk(node: &Expr, next: &mut usize, out: &mut Vec<usize>) {
            if matches!(node, Expr::Const(_)) {
                out.push(*next);
            }
            *next += 1;
            for child in node.children() {
                walk(child, next, out);
            }
        }
        let mut out = Vec::new();
        let mut next = 0;
        walk(self, &mut next, &mut out);
        out
    }

    /// Guarded evaluation; see module docs for the guard semantics.
    pub fn eval(&self, row: &[f64; 4]) -> f64 {
        self.eval_checked(row).0
    }

    /// Evaluation plus a validity flag; the flag is false if a division
    /// guard tripped or the result is non-finite.
    pub fn eval_checked(&self, row: &[f64; 4]) -> (f64, bool) {
        let mut ok = true;
        let v = self.eval_inner(row, &mut ok);
        if !v.is_finite() {
            ok = false;
        }
        (v, ok)
    }

    fn eval_inner(&self, row: &[f64; 4], ok: &mut bool) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => row[v.index()],
            Expr::Add(a, b) => a.eval_inner(row, ok) + b.eval_inner(row, ok),
            Expr::Sub(a, b) => a.eval_inner(row, ok) - b.eval_inner(row, ok),
            Expr::Mul(a, b) => a.eval_inner(row, ok) * b.eval_inner(row, ok),
            Expr::Div(a, b) => {
                let num = a.eval_inner(row, ok);
                let den = b.eval_inner(row, ok);
                if den.abs() < DIV_GUARD {
                    *ok = false;
                    SENTINEL
                } else {
                    num / den
                }
            }
            Expr::Sin(a) => a.eval_inner(row, ok).sin(),
            Expr::Cos(a) => a.eval_inner(row, ok).cos(),
            Expr::Exp(a) => a.eval_inner(row, ok).min(EXP_CLAMP).exp(),
        }
    }

    /// Canonical parenthesized infix with constants at 6 significant digits.
    pub fn infix(&self) -> String {
        match self {
            Expr::Const(c) => format_const(*c),
            Expr::Var(v) => v.name().to_string(),
            Expr::Add(a, b) => format!("({} + {})", a.infix(), b.infix()),
            Expr::Sub(a, b) => format!("({} - {})", a.infix(), b.infix()),
            Expr::Mul(a, b) => format!("({} * {})", a.infix(), b.infix()),
            Expr::Div(a, b) => format!("({} / {})", a.infix(), b.infix()),
            Expr::Sin(a) => format!("sin({})", a.infix()),
            Expr::Cos(a) => format!("cos({})", a.infix()),
            Expr::Exp(a) => format!("exp({})", a.infix()),
        }
    }

    /// True if any node satisfies the predicate.
    pub fn any_node(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        pred(self) || self.children().iter().any(|c| c.any_node(pred))
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.infix())
    }
}

/// Format a constant with exactly 6 significant digits.
pub fn format_const(v: f64) -> String {
    if v == 0.0 {
        return "0.00000".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-3..6).contains(&exp) {
        let prec = (5 - exp).max(0) as usize;
        format!("{v:.prec$}")
    } else {
        format!("{v:.5e}")
    }
}

/// Per-operator weights for complexity; the defaults are all 1, making
/// complexity the plain node count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexityWeights {
    pub constant: u32,
    pub variable: u32,
    pub add: u32,
    pub sub: u32,
    pub mul: u32,
    pub div: u32,
    pub sin: u32,
    pub cos: u32,
    pub exp: u32,
}

impl Default for ComplexityWeights {
    fn default() -> Self {
        ComplexityWeights {
            constant: 1,
            variable: 1,
            add: 1,
            sub: 1,
            mul: 1,
            div: 1,
            sin: 1,
            cos: 1,
            exp: 1,
        }
    }
}

/// Weighted node-count complexity.
pub fn complexity_weighted(expr: &Expr, w: &ComplexityWeights) -> u32 {
    let own = match expr {
        Expr::Const(_) => w.constant,
        Expr::Var(_) => w.variable,
        Expr::Add(..) => w.add,
        Expr::Sub(..) => w.sub,
        Expr::Mul(..) => w.mul,
        Expr::Div(..) => w.div,
        Expr::Sin(_) => w.sin,
        Expr::Cos(_) => w.cos,
        Expr::Exp(_) => w.exp,
    };
    own + expr
        .children()
        .iter()
        .map(|c| complexity_weighted(c, w))
        .sum::<u32>()
}

/// Complexity with default unit weights.
pub fn complexity(expr: &Expr) -> u32 {
    complexity_weighted(expr, &ComplexityWeights::default())
}

/// Postfix compilation of an expression for fast batch evaluation.
pub struct Program {
    ops: Vec<ProgOp>,
    max_stack: usize,
}

enum ProgOp {
    Const(f64),
    Var(usize),
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Exp,
}

impl Program {
    pub fn compile(expr: &Expr) -> Program {
        fn walk(node: &Expr, ops: &mut Vec<ProgOp>) {
            match node {
                Expr::Const(c) => ops.push(ProgOp::Const(*c)),
                Expr::Var(v) => ops.push(ProgOp::Var(v.index())),
                Expr::Add(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(ProgOp::Add);
                }
                Expr::Sub(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(ProgOp::Sub);
                }
                Expr::Mul(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(ProgOp::Mul);
                }
                Expr::Div(a, b) => {
                    walk(a, ops);
                    walk(b, ops);
                    ops.push(ProgOp::Div);
                }
                Expr::Sin(a) => {
                    walk(a, ops);
                    ops.push(ProgOp::Sin);
                }
                Expr::Cos(a) => {
                    walk(a, ops);
                    ops.push(ProgOp::Cos);
                }
                Expr::Exp(a) => {
                    walk(a, ops);
                    ops.push(ProgOp::Exp);
                }
            }
        }
        let mut ops = Vec::with_capacity(expr.node_count());
        walk(expr, &mut ops);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for op in &ops {
            match op {
                ProgOp::Const(_) | ProgOp::Var(_) => depth += 1,
                ProgOp::Add | ProgOp::Sub | ProgOp::Mul | ProgOp::Div => depth -= 1,
                ProgOp::Sin | ProgOp::Cos | ProgOp::Exp => {}
            }
            max_stack = max_stack.max(depth);
        }
        Program { ops, max_stack }
    }

    /// Evaluate over column data; `out` receives one value per row.
    /// Returns false (invalid) if any row trips a guard or goes non-finite.
    pub fn eval_columns(&self, vars: [&[f64]; 4], out: &mut Vec<f64>) -> bool {
        let n = vars[0].len();
        let mut stack: Vec<Vec<f64>> = (0..self.max_stack).map(|_| vec![0.0; n]).collect();
        let mut top = 0usize;
        let mut valid = true;
        for op in &self.ops {
            match op {
                ProgOp::Const(c) => {
                    stack[top].iter_mut().for_each(|v| *v = *c);
                    top += 1;
                }
                ProgOp::Var(j) => {
                    stack[top].copy_from_slice(vars[*j]);
                    top += 1;
                }
                ProgOp::Add => {
                    let (lo, hi) = stack.split_at_mut(top - 1);
                    let a = lo.last_mut().expect("stack");
                    let b = &hi[0];
                    for i in 0..n {
                        a[i] += b[i];
                    }
                    top -= 1;
                }
                ProgOp::Sub => {
                    let (lo, hi) = stack.split_at_mut(top - 1);
                    let a = lo.last_mut().expect("stack");
                    let b = &hi[0];
                    for i in 0..n {
                        a[i] -= b[i];
                    }
                    top -= 1;
                }
                ProgOp::Mul => {
                    let (lo, hi) = stack.split_at_mut(top - 1);
                    let a = lo.last_mut().expect("stack");
                    let b = &hi[0];
                    for i in 0..n {
                        a[i] *= b[i];
                    }
                    top -= 1;
                }
                ProgOp::Div => {
                    let (lo, hi) = stack.split_at_mut(top - 1);
                    let a = lo.last_mut().expect("stack");
                    let b = &hi[0];
                    for i in 0..n {
                        if b[i].abs() < DIV_GUARD {
                            a[i] = SENTINEL;
                            valid = false;
                        } else {
                            a[i] /= b[i];
                        }
                    }
                    top -= 1;
                }
                ProgOp::Sin => {
                    stack[top - 1].iter_mut().for_each(|v| *v = v.sin());
                }
                ProgOp::Cos => {
                    stack[top - 1].iter_mut().for_each(|v| *v = v.cos());
                }
                ProgOp::Exp => {
                    stack[top - 1]
                        .iter_mut()
                        .for_each(|v| *v = v.min(EXP_CLAMP).exp());
                }
            }
        }
        debug_assert_eq!(top, 1);
        out.clear();
        out.extend_from_slice(&stack[0]);
        if valid {
            valid = out.iter().all(|v| v.is_finite());
        }
        valid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_arithmetic() {
        let e = Expr::add(Expr::constant(1.0), Expr::var(Var::T));
        assert_eq!(e.eval(&[2.0, 0.0, 0.0, 0.0]), 3.0);
        assert_eq!(Expr::sin(Expr::constant(0.0)).eval(&[0.0; 4]), 0.0);
        let e = Expr::mul(
            Expr::constant(0.5),
            Expr::mul(Expr::var(Var::T), Expr::var(Var::T)),
        );
        assert_eq!(e.eval(&[3.0, 0.0, 0.0, 0.0]), 4.5);
    }

    #[test]
    fn division_guard_marks_invalid() {
        let e = Expr::div(Expr::constant(1.0), Expr::var(Var::L1));
        let (v, ok) = e.eval_checked(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(v, SENTINEL);
        assert!(!ok);
        let (v, ok) = e.eval_checked(&[0.0, 2.0, 0.0, 0.0]);
        assert_eq!(v, 0.5);
        assert!(ok);
    }

    #[test]
    fn exp_clamped() {
        let e = Expr::exp(Expr::constant(1e6));
        let (v, ok) = e.eval_checked(&[0.0; 4]);
        assert_eq!(v, EXP_CLAMP.exp());
        assert!(ok);
    }

    #[test]
    fn complexity_counts_nodes() {
        assert_eq!(complexity(&Expr::constant(3.0)), 1);
        let e = Expr::add(Expr::var(Var::T), Expr::constant(1.0));
        assert_eq!(complexity(&e), 3);
        // c1 + c2*l + c3*t + c4*t^2 as a tree: 15 nodes.
        let quad = Expr::add(
            Expr::add(
                Expr::constant(1.0),
                Expr::mul(Expr::constant(2.0), Expr::var(Var::L1)),
            ),
            Expr::add(
                Expr::mul(Expr::constant(3.0), Expr::var(Var::T)),
                Expr::mul(
                    Expr::constant(4.0),
                    Expr::mul(Expr::var(Var::T), Expr::var(Var::T)),
                ),
            ),
        );
        assert_eq!(complexity(&quad), 15);
        assert_eq!(quad.node_count() as u32, complexity(&quad));
    }

    #[test]
    fn subtree_access_round_trip() {
        let mut e = Expr::add(
            Expr::mul(Expr::constant(2.0), Expr::var(Var::T)),
            Expr::constant(1.0),
        );
        // Preorder: 0 Add, 1 Mul, 2 Const 2, 3 Var t, 4 Const 1.
        assert_eq!(e.get(2), Some(&Expr::Const(2.0)));
        assert_eq!(e.get(4), Some(&Expr::Const(1.0)));
        assert_eq!(e.depth_of(0), Some(1));
        assert_eq!(e.depth_of(3), Some(3));
        assert_eq!(e.const_indices(), vec![2, 4]);
        assert!(e.replace(3, Expr::var(Var::L2)));
        assert_eq!(e.get(3), Some(&Expr::Var(Var::L2)));
        assert!(!e.replace(99, Expr::constant(0.0)));
    }

    #[test]
    fn infix_formatting() {
        let e = Expr::add(
            Expr::mul(Expr::constant(4.9), Expr::mul(Expr::var(Var::T), Expr::var(Var::T))),
            Expr::var(Var::L1),
        );
        assert_eq!(e.infix(), "((4.90000 * (t * t)) + l1)");
        assert_eq!(format_const(1470.0), "1470.00");
        assert_eq!(format_const(0.0005), "5.00000e-4");
        assert_eq!(format_const(-2.5), "-2.50000");
        assert_eq!(format_const(1234567.0), "1.23457e6");
    }

    #[test]
    fn program_matches_tree_eval() {
        let e = Expr::add(
            Expr::div(Expr::var(Var::L1), Expr::add(Expr::var(Var::T), Expr::constant(0.5))),
            Expr::exp(Expr::cos(Expr::var(Var::L2))),
        );
        let program = Program::compile(&e);
        let t = [0.0, 0.5, 1.0, 2.0];
        let l1 = [1.0, 2.0, 3.0, 4.0];
        let l2 = [0.1, 0.2, 0.3, 0.4];
        let l3 = [0.0; 4];
        let mut out = Vec::new();
        let ok = program.eval_columns([&t, &l1, &l2, &l3], &mut out);
        assert!(ok);
        for i in 0..4 {
            let row = [t[i], l1[i], l2[i], l3[i]];
            assert!((out[i] - e.eval(&row)).abs() < 1e-15);
        }
    }

    #[test]
    fn program_flags_guard_trips() {
        let e = Expr::div(Expr::constant(1.0), Expr::var(Var::T));
        let program = Program::compile(&e);
        let t = [1.0, 0.0, 2.0];
        let zero = [0.0; 3];
        let mut out = Vec::new();
        let ok = program.eval_columns([&t, &zero, &zero, &zero], &mut out);
        assert!(!ok);
        assert_eq!(out[1], SENTINEL);
    }
}
