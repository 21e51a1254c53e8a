use std::collections::{HashMap, HashSet};

use creativ_hdl::ast::{
    const_eval, parse_literal, BinaryOp, CaseKind, Conns, Dir, DisplayKind, EdgeKind, Expr, Item,
    LValue, Module, Range, Sensitivity, Span, Stmt, UnaryOp,
};
use creativ_hdl::{instantiated_modules, parse_source, ParseOptions};

use crate::ir::{Assign, BOp, CaseLabel, Design, EdgeProc, Ex, Lv, Proc, Signal, St, UOp};
use crate::Error;

const MAX_DEPTH: usize = 64;

/// Where a statement appears; controls which constructs are allowed.
#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Initial,
    Edge,
    Comb,
}

/// Parse all sources (testbench constructs allowed), pick the top module,
/// and flatten the hierarchy into a single executable design.
pub fn compile(sources: &[(String, String)], top: Option<&str>) -> Result<Design, Error> {
    let mut modules: Vec<Module> = Vec::new();
    for (name, text) in sources {
        let sf = parse_source(
            text,
            &ParseOptions {
                allow_testbench_constructs: true,
            },
        )
        .map_err(|e| Error::Compile(format!("{name}: {e}")))?;
        for m in sf.modules {
            if modules.iter().any(|o| o.name == m.name) {
                return Err(Error::Compile(format!(
                    "{name}: duplicate module `{}`",
                    m.name
                )));
            }
            modules.push(m);
        }
    }
    if modules.is_empty() {
        return Err(Error::Compile("no modules found".into()));
    }

    let instantiated: HashSet<String> = modules
        .iter()
        .flat_map(|m| instantiated_modules(m).into_iter())
        .collect();
    let top_mod = match top {
        Some(t) => modules
            .iter()
            .find(|m| m.name == t)
            .ok_or_else(|| Error::Compile(format!("unknown top module `{t}`")))?,
        None => {
            let cands: Vec<&Module> = modules
                .iter()
                .filter(|m| !instantiated.contains(&m.name))
                .collect();
            match cands.len() {
                1 => cands[0],
                0 => {
                    return Err(Error::Compile(
                        "no top-level module (instantiation cycle?)".into(),
                    ))
                }
                _ => {
                    // A library module the design never instantiates also
                    // shows up here; testbenches are portless, so a unique
                    // portless candidate wins the tie.
                    let portless: Vec<&&Module> =
                        cands.iter().filter(|m| m.ports.is_empty()).collect();
                    if portless.len() == 1 {
                        portless[0]
                    } else {
                        let names: Vec<&str> = cands.iter().map(|m| m.name.as_str()).collect();
                        return Err(Error::Compile(format!(
                            "multiple top-level candidates ({}); pass --top",
                            names.join(", ")
                        )));
                    }
                }
            }
        }
    };

    let by_name: HashMap<&str, &Module> = modules.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut fl = Flattener {
        mods: by_name,
        d: Design {
            signals: Vec::new(),
            assigns: Vec::new(),
            combs: Vec::new(),
            edges: Vec::new(),
            initials: Vec::new(),
        },
        flat: HashMap::new(),
    };
    fl.instantiate(top_mod, "", 0)?;
    Ok(fl.d)
}

struct Scope {
    sigs: HashMap<String, usize>,
    params: HashMap<String, i64>,
}

struct Flattener<'m> {
    mods: HashMap<&'m str, &'m Module>,
    d: Design,
    flat: HashMap<String, usize>,
}

fn err(m: &Module, span: Span, msg: impl AsRef<str>) -> Error {
    Error::Compile(format!(
        "module `{}` line {}: {}",
        m.name,
        span.line,
        msg.as_ref()
    ))
}

/// Width and low bit number of a declaration range.
fn sig_shape(
    m: &Module,
    range: Option<&Range>,
    params: &HashMap<String, i64>,
    who: &str,
) -> Result<(u32, u32), Error> {
    let Some(r) = range else {
        return Ok((1, 0));
    };
    let hi = const_eval(&r.msb, params)
        .ok_or_else(|| err(m, r.span, format!("range bound of `{who}` is not constant")))?;
    let lo = const_eval(&r.lsb, params)
        .ok_or_else(|| err(m, r.span, format!("range bound of `{who}` is not constant")))?;
    if hi < 0 || lo < 0 {
        return Err(err(m, r.span, format!("negative range bound on `{who}`")));
    }
    if hi < lo {
        return Err(err(
            m,
            r.span,
            format!("ascending bit range on `{who}` is not supported"),
        ));
    }
    let width = (hi - lo + 1) as u64;
    if width > 64 {
        return Err(err(m, r.span, format!("`{who}` is wider than 64 bits")));
    }
    Ok((width as u32, lo as u32))
}

/// Count `%` conversions, validating that only b/d/h (optionally 0-flagged)
/// appear. Shared contract with the runtime renderer.
pub fn count_conversions(fmt: &str) -> Result<usize, String> {
    let mut n = 0;
    let mut it = fmt.chars();
    while let Some(c) = it.next() {
        if c != '%' {
            continue;
        }
        match it.next() {
            Some('%') => {}
            Some('0') => match it.next() {
                Some('b' | 'B' | 'd' | 'D' | 'h' | 'H') => n += 1,
                other => {
                    return Err(format!(
                        "unsupported format conversion `%0{}`",
                        other.map(String::from).unwrap_or_default()
                    ))
                }
            },
            Some(c @ ('b' | 'B' | 'd' | 'D' | 'h' | 'H')) => {
                let _ = c;
                n += 1;
            }
            other => {
                return Err(format!(
                    "unsupported format conversion `%{}`",
                    other.map(String::from).unwrap_or_default()
                ))
            }
        }
    }
    Ok(n)
}

impl<'m> Flattener<'m> {
    fn instantiate(&mut self, m: &'m Module, prefix: &str, depth: usize) -> Result<Scope, Error> {
        if depth > MAX_DEPTH {
            return Err(Error::Compile(format!(
                "instantiation of `{}` exceeds depth {MAX_DEPTH} (recursive hierarchy?)",
                m.name
            )));
        }

        let mut scope = Scope {
            sigs: HashMap::new(),
            params: HashMap::new(),
        };
        for item in &m.items {
            if let Item::Localparam { name, value, span } = item {
                let v = const_eval(value, &scope.params)
                    .ok_or_else(|| err(m, *span, format!("localparam `{name}` is not constant")))?;
                scope.params.insert(name.clone(), v);
            }
        }

        for p in &m.ports {
            let (width, lsb) = sig_shape(m, p.range.as_ref(), &scope.params, &p.name)?;
            self.declare(m, &mut scope, prefix, &p.name, width, lsb, p.span)?;
        }
        for item in &m.items {
            if let Item::Net(n) = item {
                let (width, lsb) = match n.kind {
                    creativ_hdl::ast::NetKind::Integer => (32, 0),
                    _ => sig_shape(m, n.range.as_ref(), &scope.params, &n.name)?,
                };
                self.declare(m, &mut scope, prefix, &n.name, width, lsb, n.span)?;
            }
        }

        for item in &m.items {
            match item {
                Item::Net(_) | Item::Localparam { .. } => {}
                Item::Assign { lhs, rhs, .. } => {
                    let lhs = self.rlv(m, &scope, lhs)?;
                    let rhs = self.rex(m, &scope, rhs, false)?;
                    self.d.assigns.push(Assign { lhs, rhs });
                }
                Item::Always { sens, body, .. } => match sens {
                    Sensitivity::Comb(_) => {
                        let body = self.rstmts(m, &scope, body, Mode::Comb)?;
                        self.d.combs.push(Proc { body });
                    }
                    Sensitivity::Edges { edges, span } => {
                        let mut sens = Vec::new();
                        for (kind, name) in edges {
                            let sig = *scope.sigs.get(name).ok_or_else(|| {
                                err(m, *span, format!("unknown signal `{name}` in sensitivity list"))
                            })?;
                            sens.push((*kind == EdgeKind::Pos, sig));
                        }
                        let body = self.rstmts(m, &scope, body, Mode::Edge)?;
                        self.d.edges.push(EdgeProc { sens, body });
                    }
                },
                Item::Initial { body, .. } => {
                    let body = self.rstmts(m, &scope, body, Mode::Initial)?;
                    self.d.initials.push(Proc { body });
                }
                Item::Instance {
                    module,
                    name,
                    conns,
                    span,
                } => {
                    self.instance(m, &scope, prefix, module, name, conns, *span, depth)?;
                }
            }
        }
        Ok(scope)
    }

    #[allow(clippy::too_many_arguments)]
    fn declare(
        &mut self,
        m: &Module,
        scope: &mut Scope,
        prefix: &str,
        name: &str,
        width: u32,
        lsb: u32,
        span: Span,
    ) -> Result<(), Error> {
        if scope.params.contains_key(name) {
            return Err(err(m, span, format!("`{name}` already declared as localparam")));
        }
        let flat = format!("{prefix}{name}");
        if self.flat.contains_key(&flat) || scope.sigs.contains_key(name) {
            return Err(err(m, span, format!("duplicate declaration of `{name}`")));
        }
        let id = self.d.signals.len();
        self.d.signals.push(Signal {
            name: flat.clone(),
            width,
            lsb,
        });
        self.flat.insert(flat, id);
        scope.sigs.insert(name.to_string(), id);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn instance(
        &mut self,
        m: &'m Module,
        scope: &Scope,
        prefix: &str,
        module: &str,
        inst: &str,
        conns: &Conns,
        span: Span,
        depth: usize,
    ) -> Result<(), Error> {
        let child = *self
            .mods
            .get(module)
            .ok_or_else(|| err(m, span, format!("unknown module `{module}`")))?;
        let child_prefix = format!("{prefix}{inst}.");
        let child_scope = self.instantiate(child, &child_prefix, depth + 1)?;

        let bind = |this: &mut Self, port_name: &str, expr: &Expr| -> Result<(), Error> {
            let port = child
                .ports
                .iter()
                .find(|p| p.name == port_name)
                .ok_or_else(|| {
                    err(m, span, format!("module `{module}` has no port `{port_name}`"))
                })?;
            let child_sig = child_scope.sigs[port_name];
            match port.dir {
                Dir::Input => {
                    let rhs = this.rex(m, scope, expr, false)?;
                    this.d.assigns.push(Assign {
                        lhs: Lv::Sig(child_sig),
                        rhs,
                    });
                }
                Dir::Output => {
                    let lhs = this.expr_to_lv(m, scope, expr).map_err(|_| {
                        err(
                            m,
                            expr.span(),
                            format!("output port `{port_name}` connected to a non-assignable expression"),
                        )
                    })?;
                    this.d.assigns.push(Assign {
                        lhs,
                        rhs: Ex::Sig(child_sig),
                    });
                }
            }
            Ok(())
        };

        match conns {
            Conns::Named(list) => {
                let mut seen = HashSet::new();
                for (port_name, expr) in list {
                    if !seen.insert(port_name.as_str()) {
                        return Err(err(m, span, format!("port `{port_name}` connected twice")));
                    }
                    if let Some(expr) = expr {
                        bind(self, port_name, expr)?;
                    }
                }
            }
            Conns::Positional(exprs) => {
                if exprs.len() != child.ports.len() {
                    return Err(err(
                        m,
                        span,
                        format!(
                            "`{module}` has {} ports but {} connections given",
                            child.ports.len(),
                            exprs.len()
                        ),
                    ));
                }
                let names: Vec<String> = child.ports.iter().map(|p| p.name.clone()).collect();
                for (port_name, expr) in names.iter().zip(exprs) {
                    bind(self, port_name, expr)?;
                }
            }
        }
        Ok(())
    }

    /// Instance output connections must be something we can drive.
    fn expr_to_lv(&mut self, m: &Module, scope: &Scope, e: &Expr) -> Result<Lv, Error> {
        match e {
            Expr::Ident { name, span } => {
                let sig = *scope
                    .sigs
                    .get(name)
                    .ok_or_else(|| err(m, *span, format!("unknown identifier `{name}`")))?;
                Ok(Lv::Sig(sig))
            }
            Expr::Bit { base, index, span } => self.make_bit_lv(m, scope, base, index, *span),
            Expr::Part {
                base,
                msb,
                lsb,
                span,
            } => self.make_part_lv(m, scope, base, msb, lsb, *span),
            Expr::Concat { parts, .. } => {
                let parts = parts
                    .iter()
                    .map(|p| self.expr_to_lv(m, scope, p))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Lv::Concat(parts))
            }
            other => Err(err(m, other.span(), "not assignable")),
        }
    }

    fn lookup_sig(
        &self,
        m: &Module,
        scope: &Scope,
        name: &str,
        span: Span,
    ) -> Result<usize, Error> {
        scope.sigs.get(name).copied().ok_or_else(|| {
            if scope.params.contains_key(name) {
                err(m, span, format!("`{name}` is a localparam, not a signal"))
            } else {
                err(m, span, format!("unknown identifier `{name}`"))
            }
        })
    }

    fn make_bit_lv(
        &mut self,
        m: &Module,
        scope: &Scope,
        base: &str,
        index: &Expr,
        span: Span,
    ) -> Result<Lv, Error> {
        let sig = self.lookup_sig(m, scope, base, span)?;
        self.check_const_index(m, scope, sig, index, span)?;
        let index = self.rex(m, scope, index, false)?;
        Ok(Lv::Bit { sig, index })
    }

    fn make_part_lv(
        &mut self,
        m: &Module,
        scope: &Scope,
        base: &str,
        msb: &Expr,
        lsb: &Expr,
        span: Span,
    ) -> Result<Lv, Error> {
        let sig = self.lookup_sig(m, scope, base, span)?;
        let (hi, lo) = self.part_bounds(m, scope, sig, base, msb, lsb, span)?;
        Ok(Lv::Part { sig, hi, lo })
    }

    /// A constant bit index must land inside the declared range.
    fn check_const_index(
        &self,
        m: &Module,
        scope: &Scope,
        sig: usize,
        index: &Expr,
        span: Span,
    ) -> Result<(), Error> {
        if let Some(i) = const_eval(index, &scope.params) {
            let s = &self.d.signals[sig];
            let lo = s.lsb as i64;
            let hi = lo + s.width as i64 - 1;
            if i < lo || i > hi {
                return Err(err(
                    m,
                    span,
                    format!("bit select [{i}] out of range [{hi}:{lo}]"),
                ));
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn part_bounds(
        &self,
        m: &Module,
        scope: &Scope,
        sig: usize,
        base: &str,
        msb: &Expr,
        lsb: &Expr,
        span: Span,
    ) -> Result<(u32, u32), Error> {
        let hi = const_eval(msb, &scope.params)
            .ok_or_else(|| err(m, span, "part select bounds must be constant"))?;
        let lo = const_eval(lsb, &scope.params)
            .ok_or_else(|| err(m, span, "part select bounds must be constant"))?;
        if lo > hi {
            return Err(err(m, span, format!("reversed part select `{base}[{hi}:{lo}]`")));
        }
        let s = &self.d.signals[sig];
        let decl_lo = s.lsb as i64;
        let decl_hi = decl_lo + s.width as i64 - 1;
        if lo < decl_lo || hi > decl_hi {
            return Err(err(
                m,
                span,
                format!("part select `{base}[{hi}:{lo}]` out of range [{decl_hi}:{decl_lo}]"),
            ));
        }
        Ok(((hi - decl_lo) as u32, (lo - decl_lo) as u32))
    }

    fn rlv(&mut self, m: &Module, scope: &Scope, lv: &LValue) -> Result<Lv, Error> {
        match lv {
            LValue::Ident { name, span } => {
                Ok(Lv::Sig(self.lookup_sig(m, scope, name, *span)?))
            }
            LValue::Bit { base, index, span } => self.make_bit_lv(m, scope, base, index, *span),
            LValue::Part {
                base,
                msb,
                lsb,
                span,
            } => self.make_part_lv(m, scope, base, msb, lsb, *span),
            LValue::Concat { parts, .. } => {
                let parts = parts
                    .iter()
                    .map(|p| self.rlv(m, scope, p))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Lv::Concat(parts))
            }
        }
    }

    fn rex(&mut self, m: &Module, scope: &Scope, e: &Expr, in_label: bool) -> Result<Ex, Error> {
        match e {
            Expr::Ident { name, span } => {
                if let Some(&v) = scope.params.get(name) {
                    return Ok(Ex::Const {
                        value: (v as u64) & 0xFFFF_FFFF,
                        width: None,
                    });
                }
                Ok(Ex::Sig(self.lookup_sig(m, scope, name, *span)?))
            }
            Expr::Literal { raw, span } => {
                let lit = parse_literal(raw).map_err(|msg| err(m, *span, msg))?;
                if lit.zmask != 0 && !in_label {
                    return Err(err(
                        m,
                        *span,
                        "z digits are only supported in casez labels",
                    ));
                }
                Ok(Ex::Const {
                    value: lit.value,
                    width: lit.width,
                })
            }
            Expr::Unary { op, arg, .. } => Ok(Ex::Unary {
                op: map_uop(*op),
                arg: Box::new(self.rex(m, scope, arg, false)?),
            }),
            Expr::Binary { op, lhs, rhs, .. } => Ok(Ex::Binary {
                op: map_bop(*op),
                lhs: Box::new(self.rex(m, scope, lhs, false)?),
                rhs: Box::new(self.rex(m, scope, rhs, false)?),
            }),
            Expr::Ternary {
                cond,
                then_e,
                else_e,
                ..
            } => Ok(Ex::Ternary {
                cond: Box::new(self.rex(m, scope, cond, false)?),
                then_e: Box::new(self.rex(m, scope, then_e, false)?),
                else_e: Box::new(self.rex(m, scope, else_e, false)?),
            }),
            Expr::Bit { base, index, span } => {
                let sig = self.lookup_sig(m, scope, base, *span)?;
                self.check_const_index(m, scope, sig, index, *span)?;
                Ok(Ex::Bit {
                    sig,
                    index: Box::new(self.rex(m, scope, index, false)?),
                })
            }
            Expr::Part {
                base,
                msb,
                lsb,
                span,
            } => {
                let sig = self.lookup_sig(m, scope, base, *span)?;
                let (hi, lo) = self.part_bounds(m, scope, sig, base, msb, lsb, *span)?;
                Ok(Ex::Part { sig, hi, lo })
            }
            Expr::Concat { parts, span } => {
                let mut rs = Vec::new();
                let mut total: u64 = 0;
                for p in parts {
                    let r = self.rex(m, scope, p, false)?;
                    if matches!(r, Ex::Const { width: None, .. }) {
                        return Err(err(m, p.span(), "unsized literal in concatenation"));
                    }
                    total += u64::from(self.d.width_of(&r));
                    rs.push(r);
                }
                if total > 64 {
                    return Err(err(m, *span, "concatenation wider than 64 bits"));
                }
                Ok(Ex::Concat { parts: rs })
            }
            Expr::Repeat { count, inner, span } => {
                let n = const_eval(count, &scope.params)
                    .ok_or_else(|| err(m, *span, "replication count must be constant"))?;
                if n <= 0 {
                    return Err(err(m, *span, "replication count must be positive"));
                }
                let inner = self.rex(m, scope, inner, false)?;
                if matches!(inner, Ex::Const { width: None, .. }) {
                    return Err(err(m, *span, "unsized literal in replication"));
                }
                let total = n as u64 * u64::from(self.d.width_of(&inner));
                if total > 64 {
                    return Err(err(m, *span, "replication wider than 64 bits"));
                }
                Ok(Ex::Repeat {
                    count: n as u32,
                    inner: Box::new(inner),
                })
            }
            Expr::Str { span, .. } => Err(err(
                m,
                *span,
                "string literals are only supported as $display format strings",
            )),
        }
    }

    fn rstmts(&mut self, m: &Module, scope: &Scope, s: &Stmt, mode: Mode) -> Result<Vec<St>, Error> {
        let mut out = Vec::new();
        self.rstmt(m, scope, s, mode, &mut out)?;
        Ok(out)
    }

    fn rstmt(
        &mut self,
        m: &Module,
        scope: &Scope,
        s: &Stmt,
        mode: Mode,
        out: &mut Vec<St>,
    ) -> Result<(), Error> {
        match s {
            Stmt::Block { stmts, .. } => {
                for s in stmts {
                    self.rstmt(m, scope, s, mode, out)?;
                }
            }
            Stmt::Assign {
                lhs,
                rhs,
                nonblocking,
                ..
            } => {
                out.push(St::Assign {
                    lhs: self.rlv(m, scope, lhs)?,
                    rhs: self.rex(m, scope, rhs, false)?,
                    nonblocking: *nonblocking,
                });
            }
            Stmt::If {
                cond,
                then_s,
                else_s,
                ..
            } => {
                let cond = self.rex(m, scope, cond, false)?;
                let then_s = self.rstmts(m, scope, then_s, mode)?;
                let else_s = match else_s {
                    Some(e) => self.rstmts(m, scope, e, mode)?,
                    None => Vec::new(),
                };
                out.push(St::If {
                    cond,
                    then_s,
                    else_s,
                });
            }
            Stmt::Case {
                kind,
                subject,
                arms,
                default,
                span,
            } => {
                let subject = self.rex(m, scope, subject, false)?;
                let mut rarms = Vec::new();
                for arm in arms {
                    let mut labels = Vec::new();
                    for l in &arm.labels {
                        labels.push(self.rlabel(m, scope, l, *kind)?);
                    }
                    rarms.push((labels, self.rstmts(m, scope, &arm.body, mode)?));
                }
                let default = match default {
                    Some(d) => self.rstmts(m, scope, d, mode)?,
                    None => Vec::new(),
                };
                let _ = span;
                out.push(St::Case {
                    subject,
                    arms: rarms,
                    default,
                });
            }
            Stmt::Delay {
                amount,
                then_s,
                span,
            } => {
                if mode != Mode::Initial {
                    return Err(err(
                        m,
                        *span,
                        "delays are only supported in initial blocks",
                    ));
                }
                out.push(St::Delay { amount: *amount });
                if let Some(t) = then_s {
                    self.rstmt(m, scope, t, mode, out)?;
                }
            }
            Stmt::For {
                var,
                init,
                cond,
                step_var,
                step,
                body,
                span,
            } => {
                let var = self.lookup_sig(m, scope, var, *span)?;
                let step_var = self.lookup_sig(m, scope, step_var, *span)?;
                out.push(St::For {
                    var,
                    init: self.rex(m, scope, init, false)?,
                    cond: self.rex(m, scope, cond, false)?,
                    step_var,
                    step: self.rex(m, scope, step, false)?,
                    body: self.rstmts(m, scope, body, mode)?,
                });
            }
            Stmt::Display {
                task,
                format,
                args,
                span,
            } => {
                if mode == Mode::Comb {
                    return Err(err(
                        m,
                        *span,
                        "$display is not supported in combinational always blocks",
                    ));
                }
                let n = count_conversions(format).map_err(|msg| err(m, *span, msg))?;
                if n != args.len() {
                    return Err(err(
                        m,
                        *span,
                        format!("format expects {n} arguments, got {}", args.len()),
                    ));
                }
                let args = args
                    .iter()
                    .map(|a| self.rex(m, scope, a, false))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(St::Display {
                    newline: *task == DisplayKind::Display,
                    format: format.clone(),
                    args,
                });
            }
            Stmt::Finish { span } => {
                if mode == Mode::Comb {
                    return Err(err(
                        m,
                        *span,
                        "$finish is not supported in combinational always blocks",
                    ));
                }
                out.push(St::Finish);
            }
            Stmt::Empty { .. } => {}
        }
        Ok(())
    }

    fn rlabel(
        &mut self,
        m: &Module,
        scope: &Scope,
        label: &Expr,
        kind: CaseKind,
    ) -> Result<CaseLabel, Error> {
        if let Expr::Literal { raw, span } = label {
            let lit = parse_literal(raw).map_err(|msg| err(m, *span, msg))?;
            if lit.zmask != 0 && kind != CaseKind::Casez {
                return Err(err(
                    m,
                    *span,
                    "z digits are only supported in casez labels",
                ));
            }
            return Ok(CaseLabel {
                value: Ex::Const {
                    value: lit.value,
                    width: lit.width,
                },
                mask: lit.zmask,
            });
        }
        Ok(CaseLabel {
            value: self.rex(m, scope, label, false)?,
            mask: 0,
        })
    }
}

fn map_uop(op: UnaryOp) -> UOp {
    match op {
        UnaryOp::Not => UOp::Not,
        UnaryOp::LogNot => UOp::LogNot,
        UnaryOp::Neg => UOp::Neg,
        UnaryOp::RedAnd => UOp::RedAnd,
        UnaryOp::RedOr => UOp::RedOr,
        UnaryOp::RedXor => UOp::RedXor,
        UnaryOp::RedNand => UOp::RedNand,
        UnaryOp::RedNor => UOp::RedNor,
        UnaryOp::RedXnor => UOp::RedXnor,
    }
}

fn map_bop(op: BinaryOp) -> BOp {
    match op {
        BinaryOp::Add => BOp::Add,
        BinaryOp::Sub => BOp::Sub,
        BinaryOp::Mul => BOp::Mul,
        BinaryOp::Div => BOp::Div,
        BinaryOp::Mod => BOp::Mod,
        BinaryOp::And => BOp::And,
        BinaryOp::Or => BOp::Or,
        BinaryOp::Xor => BOp::Xor,
        BinaryOp::Xnor => BOp::Xnor,
        BinaryOp::LogAnd => BOp::LogAnd,
        BinaryOp::LogOr => BOp::LogOr,
        BinaryOp::Eq | BinaryOp::CaseEq => BOp::Eq,
        BinaryOp::Neq | BinaryOp::CaseNeq => BOp::Neq,
        BinaryOp::Lt => BOp::Lt,
        BinaryOp::Le => BOp::Le,
        BinaryOp::Gt => BOp::Gt,
        BinaryOp::Ge => BOp::Ge,
        BinaryOp::Shl => BOp::Shl,
        BinaryOp::Shr => BOp::Shr,
    }
}
