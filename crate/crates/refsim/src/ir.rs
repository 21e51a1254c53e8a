use serde::{Deserialize, Serialize};

/// Flattened, fully resolved two-state design. This is what `compile` writes
/// to disk and `run` executes; all hierarchy, names, and localparams are gone
/// except for the flat signal names kept for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Design {
    pub signals: Vec<Signal>,
    pub assigns: Vec<Assign>,
    pub combs: Vec<Proc>,
    pub edges: Vec<EdgeProc>,
    pub initials: Vec<Proc>,
}

impl Design {
    /// Self-determined width of an expression. Unsized literals are 32 bits
    /// (wider only when the value needs more).
    pub fn width_of(&self, e: &Ex) -> u32 {
        match e {
            Ex::Const { value, width } => match width {
                Some(w) => *w,
                None => 32.max(64 - value.leading_zeros()),
            },
            Ex::Sig(i) => self.signals[*i].width,
            Ex::Bit { .. } => 1,
            Ex::Part { hi, lo, .. } => hi - lo + 1,
            Ex::Unary { op, arg } => match op {
                UOp::Not | UOp::Neg => self.width_of(arg),
                _ => 1,
            },
            Ex::Binary { op, lhs, rhs } => match op {
                BOp::Add
                | BOp::Sub
                | BOp::Mul
                | BOp::Div
                | BOp::Mod
                | BOp::And
                | BOp::Or
                | BOp::Xor
                | BOp::Xnor => self.width_of(lhs).max(self.width_of(rhs)),
                BOp::Shl | BOp::Shr => self.width_of(lhs),
                _ => 1,
            },
            Ex::Ternary { then_e, else_e, .. } => {
                self.width_of(then_e).max(self.width_of(else_e))
            }
            Ex::Concat { parts } => parts.iter().map(|p| self.width_of(p)).sum(),
            Ex::Repeat { count, inner } => count * self.width_of(inner),
        }
    }

    /// Static width of an assignment target.
    pub fn width_of_lv(&self, lv: &Lv) -> u32 {
        match lv {
            Lv::Sig(i) => self.signals[*i].width,
            Lv::Bit { .. } => 1,
            Lv::Part { hi, lo, .. } => hi - lo + 1,
            Lv::Concat(parts) => parts.iter().map(|p| self.width_of_lv(p)).sum(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub width: u32,
    /// Declared low bit number: `wire [4:1] x` stores lsb = 1.
    pub lsb: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assign {
    pub lhs: Lv,
    pub rhs: Ex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Proc {
    pub body: Vec<St>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeProc {
    /// (true = posedge, signal). Edge of a vector follows its LSB.
    pub sens: Vec<(bool, usize)>,
    pub body: Vec<St>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Ex {
    Const {
        value: u64,
        /// None = unsized (32-bit self-width).
        width: Option<u32>,
    },
    Sig(usize),
    Bit {
        sig: usize,
        index: Box<Ex>,
    },
    Part {
        sig: usize,
        /// Physical bit offsets after lsb normalization.
        hi: u32,
        lo: u32,
    },
    Unary {
        op: UOp,
        arg: Box<Ex>,
    },
    Binary {
        op: BOp,
        lhs: Box<Ex>,
        rhs: Box<Ex>,
    },
    Ternary {
        cond: Box<Ex>,
        then_e: Box<Ex>,
        else_e: Box<Ex>,
    },
    Concat {
        parts: Vec<Ex>,
    },
    Repeat {
        count: u32,
        inner: Box<Ex>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UOp {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BOp {
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
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Lv {
    Sig(usize),
    Bit { sig: usize, index: Ex },
    Part { sig: usize, hi: u32, lo: u32 },
    Concat(Vec<Lv>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseLabel {
    pub value: Ex,
    /// Bits to ignore in the comparison (casez z/? digits).
    pub mask: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum St {
    Assign {
        lhs: Lv,
        rhs: Ex,
        nonblocking: bool,
    },
    If {
        cond: Ex,
        then_s: Vec<St>,
        else_s: Vec<St>,
    },
    Case {
        subject: Ex,
        arms: Vec<(Vec<CaseLabel>, Vec<St>)>,
        default: Vec<St>,
    },
    Delay {
        amount: u64,
    },
    For {
        var: usize,
        init: Ex,
        cond: Ex,
        step_var: usize,
        step: Ex,
        body: Vec<St>,
    },
    Display {
        newline: bool,
        format: String,
        args: Vec<Ex>,
    },
    Finish,
}
