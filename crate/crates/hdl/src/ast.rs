use std::collections::HashMap;
use std::fmt;

/// Source position. Equality is always true so that AST comparisons ignore
/// positions (parse -> print -> parse must be a fixed point).
#[derive(Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}
impl Eq for Span {}

impl fmt::Debug for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Input,
    Output,
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dir::Input => "input",
            Dir::Output => "output",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub name: String,
    pub dir: Dir,
    pub is_reg: bool,
    pub range: Option<Range>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetDecl {
    pub name: String,
    pub kind: NetKind,
    pub range: Option<Range>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    LogNot,
    Neg,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Not => "not",
            UnaryOp::LogNot => "lognot",
            UnaryOp::Neg => "neg",
            UnaryOp::RedAnd => "redand",
            UnaryOp::RedOr => "redor",
            UnaryOp::RedXor => "redxor",
            UnaryOp::RedNand => "rednand",
            UnaryOp::RedNor => "rednor",
            UnaryOp::RedXnor => "redxnor",
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            UnaryOp::Not => "~",
            UnaryOp::LogNot => "!",
            UnaryOp::Neg => "-",
            UnaryOp::RedAnd => "&",
            UnaryOp::RedOr => "|",
            UnaryOp::RedXor => "^",
            UnaryOp::RedNand => "~&",
            UnaryOp::RedNor => "~|",
            UnaryOp::RedXnor => "~^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
    Eq,
    Neq,
    CaseEq,
    CaseNeq,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
}

impl BinaryOp {
    /// Operator name used in graph labels. Case equality compares the same
    /// dataflow as logical equality, so both map to eq/neq.
    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Mod => "mod",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Xor => "xor",
            BinaryOp::Xnor => "xnor",
            BinaryOp::LogAnd => "logand",
            BinaryOp::LogOr => "logor",
            BinaryOp::Eq | BinaryOp::CaseEq => "eq",
            BinaryOp::Neq | BinaryOp::CaseNeq => "neq",
            BinaryOp::Lt => "lt",
            BinaryOp::Le => "le",
            BinaryOp::Gt => "gt",
            BinaryOp::Ge => "ge",
            BinaryOp::Shl => "shl",
            BinaryOp::Shr => "shr",
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Mod => "%",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Xor => "^",
            BinaryOp::Xnor => "~^",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
            BinaryOp::Eq => "==",
            BinaryOp::Neq => "!=",
            BinaryOp::CaseEq => "===",
            BinaryOp::CaseNeq => "!==",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Ident {
        name: String,
        span: Span,
    },
    Literal {
        raw: String,
        span: Span,
    },
    Unary {
        op: UnaryOp,
        arg: Box<Expr>,
        span: Span,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    Ternary {
        cond: Box<Expr>,
        then_e: Box<Expr>,
        else_e: Box<Expr>,
        span: Span,
    },
    Bit {
        base: String,
        index: Box<Expr>,
        span: Span,
    },
    Part {
        base: String,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        span: Span,
    },
    Concat {
        parts: Vec<Expr>,
        span: Span,
    },
    Repeat {
        count: Box<Expr>,
        inner: Box<Expr>,
        span: Span,
    },
    /// String literal; only valid as a $display argument (testbench subset).
    Str {
        value: String,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Ident { span, .. }
            | Expr::Literal { span, .. }
            | Expr::Unary { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Ternary { span, .. }
            | Expr::Bit { span, .. }
            | Expr::Part { span, .. }
            | Expr::Concat { span, .. }
            | Expr::Repeat { span, .. }
            | Expr::Str { span, .. } => *span,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LValue {
    Ident {
        name: String,
        span: Span,
    },
    Bit {
        base: String,
        index: Box<Expr>,
        span: Span,
    },
    Part {
        base: String,
        msb: Box<Expr>,
        lsb: Box<Expr>,
        span: Span,
    },
    Concat {
        parts: Vec<LValue>,
        span: Span,
    },
}

impl LValue {
    /// Base signal names, left to right (concat order preserved).
    pub fn bases(&self) -> Vec<&str> {
        match self {
            LValue::Ident { name, .. } => vec![name.as_str()],
            LValue::Bit { base, .. } | LValue::Part { base, .. } => vec![base.as_str()],
            LValue::Concat { parts, .. } => parts.iter().flat_map(|p| p.bases()).collect(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            LValue::Ident { span, .. }
            | LValue::Bit { span, .. }
            | LValue::Part { span, .. }
            | LValue::Concat { span, .. } => *span,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisplayKind {
    Display,
    Write,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Block {
        stmts: Vec<Stmt>,
        span: Span,
    },
    Assign {
        lhs: LValue,
        rhs: Expr,
        nonblocking: bool,
        span: Span,
    },
    If {
        cond: Expr,
        then_s: Box<Stmt>,
        else_s: Option<Box<Stmt>>,
        span: Span,
    },
    Case {
        kind: CaseKind,
        subject: Expr,
        arms: Vec<CaseArm>,
        default: Option<Box<Stmt>>,
        span: Span,
    },
    /// `#N stmt` or bare `#N;` (testbench subset).
    Delay {
        amount: u64,
        then_s: Option<Box<Stmt>>,
        span: Span,
    },
    /// `for (v = init; cond; v = step) body` (testbench subset).
    For {
        var: String,
        init: Expr,
        cond: Expr,
        step_var: String,
        step: Expr,
        body: Box<Stmt>,
        span: Span,
    },
    Display {
        task: DisplayKind,
        format: String,
        args: Vec<Expr>,
        span: Span,
    },
    Finish {
        span: Span,
    },
    Empty {
        span: Span,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sensitivity {
    /// `@(*)` or a plain name list; name lists are normalized to `*`.
    Comb(Span),
    Edges {
        edges: Vec<(EdgeKind, String)>,
        span: Span,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Conns {
    Named(Vec<(String, Option<Expr>)>),
    Positional(Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Net(NetDecl),
    Localparam {
        name: String,
        value: Expr,
        span: Span,
    },
    Assign {
        lhs: LValue,
        rhs: Expr,
        span: Span,
    },
    Always {
        sens: Sensitivity,
        body: Stmt,
        span: Span,
    },
    Initial {
        body: Stmt,
        span: Span,
    },
    Instance {
        module: String,
        name: String,
        conns: Conns,
        span: Span,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Module {
    pub name: String,
    pub ports: Vec<Port>,
    pub items: Vec<Item>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceFile {
    pub modules: Vec<Module>,
}

/// Parsed integer literal. `zmask` marks bits written as z or ? (don't-care
/// in casez labels, zero elsewhere). Four-state x digits are rejected at lex
/// time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LitValue {
    pub width: Option<u32>,
    pub value: u64,
    pub zmask: u64,
}

pub fn parse_literal(raw: &str) -> Result<LitValue, String> {
    let clean: String = raw.chars().filter(|&c| c != '_').collect();
    let (size_part, rest) = match clean.find('\'') {
        Some(q) => (&clean[..q], &clean[q + 1..]),
        None => {
            let value = clean
                .parse::<u64>()
                .map_err(|_| format!("invalid decimal literal `{raw}`"))?;
            return Ok(LitValue {
                width: None,
                value,
                zmask: 0,
            });
        }
    };
    let width = if size_part.is_empty() {
        None
    } else {
        let w: u32 = size_part
            .parse()
            .map_err(|_| format!("invalid literal size in `{raw}`"))?;
        if w == 0 || w > 64 {
            return Err(format!("literal width {w} out of range 1..=64"));
        }
        Some(w)
    };
    let mut chars = rest.chars();
    let base = chars
        .next()
        .ok_or_else(|| format!("missing base in `{raw}`"))?;
    let digits: String = chars.collect();
    if digits.is_empty() {
        return Err(format!("missing digits in `{raw}`"));
    }
    let bits_per = match base.to_ascii_lowercase() {
        'b' => 1,
        'o' => 3,
        'h' => 4,
        'd' => 0,
        b => return Err(format!("unknown base `{b}` in `{raw}`")),
    };
    if bits_per == 0 {
        if digits.chars().any(|c| !c.is_ascii_digit()) {
            return Err(format!("invalid decimal digits in `{raw}`"));
        }
        let value = digits
            .parse::<u64>()
            .map_err(|_| format!("decimal literal `{raw}` overflows 64 bits"))?;
        return Ok(LitValue {
            width,
            value,
            zmask: 0,
        });
    }
    let mut value: u64 = 0;
    let mut zmask: u64 = 0;
    for c in digits.chars() {
        let (v, z) = match c.to_ascii_lowercase() {
            'z' | '?' => (0, (1u64 << bits_per) - 1),
            'x' => return Err(format!("four-state x digit in `{raw}` is not supported")),
            d => {
                let v = d
                    .to_digit(16)
                    .filter(|&v| v < (1 << bits_per))
                    .ok_or_else(|| format!("invalid digit `{c}` in `{raw}`"))?;
                (v as u64, 0)
            }
        };
        if value.leading_zeros() < bits_per || zmask.leading_zeros() < bits_per {
            return Err(format!("literal `{raw}` overflows 64 bits"));
        }
        value = (value << bits_per) | v;
        zmask = (zmask << bits_per) | z;
    }
    if let Some(w) = width {
        let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        value &= mask;
        zmask &= mask;
    }
    Ok(LitValue {
        width,
        value,
        zmask,
    })
}

/// Evaluate a constant expression (literals, localparams, arithmetic).
/// Returns None when the expression involves anything non-constant.
pub fn const_eval(e: &Expr, params: &HashMap<String, i64>) -> Option<i64> {
    match e {
        Expr::Literal { raw, .. } => {
            let lit = parse_literal(raw).ok()?;
            if lit.zmask != 0 {
                return None;
            }
            i64::try_from(lit.value).ok()
        }
        Expr::Ident { name, .. } => params.get(name).copied(),
        Expr::Unary { op, arg, .. } => {
            let v = const_eval(arg, params)?;
            match op {
                UnaryOp::Neg => Some(-v),
                UnaryOp::Not => Some(!v),
                UnaryOp::LogNot => Some((v == 0) as i64),
                _ => None,
            }
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let a = const_eval(lhs, params)?;
            let b = const_eval(rhs, params)?;
            match op {
                BinaryOp::Add => a.checked_add(b),
                BinaryOp::Sub => a.checked_sub(b),
                BinaryOp::Mul => a.checked_mul(b),
                BinaryOp::Div => (b != 0).then(|| a / b),
                BinaryOp::Mod => (b != 0).then(|| a % b),
                BinaryOp::Shl => u32::try_from(b).ok().and_then(|s| a.checked_shl(s)),
                BinaryOp::Shr => u32::try_from(b).ok().and_then(|s| a.checked_shr(s)),
                _ => None,
            }
        }
        Expr::Ternary {
            cond,
            then_e,
            else_e,
            ..
        } => {
            let c = const_eval(cond, params)?;
            const_eval(if c != 0 { then_e } else { else_e }, params)
        }
        _ => None,
    }
}

/// Width of a declared range given the module's localparam values; a missing
/// range means a 1-bit signal.
pub fn range_width(range: Option<&Range>, params: &HashMap<String, i64>) -> Option<u32> {
    match range {
        None => Some(1),
        Some(r) => {
            let msb = const_eval(&r.msb, params)?;
            let lsb = const_eval(&r.lsb, params)?;
            let w = (msb - lsb).unsigned_abs() + 1;
            u32::try_from(w).ok().filter(|&w| w >= 1 && w <= 64)
        }
    }
}
