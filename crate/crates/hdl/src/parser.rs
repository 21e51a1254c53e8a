use std::collections::{HashMap, HashSet};

use crate::ast::*;
use crate::lexer::{lex, Tok, Token};
use crate::HdlError;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept testbench-only constructs: initial blocks, delays, for loops,
    /// $display/$write/$finish, string literals.
    pub allow_testbench_constructs: bool,
}

/// Parse one or more modules. No cross-item semantic checks; callers that
/// elaborate (the simulator) do their own resolution.
pub fn parse_source(src: &str, opts: &ParseOptions) -> Result<SourceFile, HdlError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        opts: opts.clone(),
    };
    let mut modules = Vec::new();
    while !p.at_eof() {
        modules.push(p.parse_module()?);
    }
    if modules.is_empty() {
        return Err(p.err_here("expected `module`"));
    }
    Ok(SourceFile { modules })
}

/// Strict single-module parse: synthesizable subset only, exactly one module,
/// no trailing text, and full semantic validation (declared identifiers,
/// constant ranges, reg/net assignment discipline).
pub fn parse_module(src: &str) -> Result<Module, HdlError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        opts: ParseOptions::default(),
    };
    let module = p.parse_module()?;
    if !p.at_eof() {
        return Err(p.expected(&["end of input"]));
    }
    validate_module(&module)?;
    Ok(module)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    opts: ParseOptions,
}

struct PendingPort {
    name: String,
    dir: Option<Dir>,
    is_reg: bool,
    range: Option<Range>,
    span: Span,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.i.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i.min(self.toks.len() - 1)].clone();
        if self.i < self.toks.len() - 1 {
            self.i += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn span(&self) -> Span {
        let t = self.peek();
        Span {
            line: t.line,
            col: t.col,
        }
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn at_kw(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Kw(x) if *x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.at_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<Token, HdlError> {
        if self.at_sym(s) {
            Ok(self.bump())
        } else {
            Err(self.expected(&[s]))
        }
    }

    fn expect_kw(&mut self, k: &'static str) -> Result<Token, HdlError> {
        if self.at_kw(k) {
            Ok(self.bump())
        } else {
            Err(self.expected(&[k]))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, Span), HdlError> {
        let span = self.span();
        match &self.peek().tok {
            Tok::Ident(_) => {
                let t = self.bump();
                match t.tok {
                    Tok::Ident(n) => Ok((n, span)),
                    _ => unreachable!(),
                }
            }
            _ => Err(self.expected(&["identifier"])),
        }
    }

    fn expected(&self, expected: &[&str]) -> HdlError {
        let t = self.peek();
        let list = expected
            .iter()
            .map(|e| format!("`{e}`"))
            .collect::<Vec<_>>()
            .join(" or ");
        HdlError::Parse {
            line: t.line,
            col: t.col,
            msg: format!("found {}, expected {}", t.tok.describe(), list),
        }
    }

    fn err_here(&self, msg: impl Into<String>) -> HdlError {
        let t = self.peek();
        HdlError::Parse {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn unsupported(&self, construct: impl Into<String>) -> HdlError {
        let t = self.peek();
        HdlError::Unsupported {
            construct: construct.into(),
            line: t.line,
            col: t.col,
        }
    }

    fn tb_only(&self, construct: &str) -> Result<(), HdlError> {
        if self.opts.allow_testbench_constructs {
            Ok(())
        } else {
            Err(self.unsupported(construct))
        }
    }

    fn parse_module(&mut self) -> Result<Module, HdlError> {
        let span = self.span();
        self.expect_kw("module")?;
        let (name, _) = self.expect_ident()?;
        if self.at_sym("#") {
            return Err(self.unsupported("module parameter list"));
        }
        let mut ports: Vec<PendingPort> = Vec::new();
        if self.eat_sym("(") {
            if !self.at_sym(")") {
                self.parse_port_list(&mut ports)?;
            }
            self.expect_sym(")")?;
        }
        self.expect_sym(";")?;

        let mut items = Vec::new();
        loop {
            if self.eat_kw("endmodule") {
                break;
            }
            if self.at_eof() {
                return Err(self.expected(&["endmodule"]));
            }
            self.parse_item(&mut ports, &mut items)?;
        }

        let mut done = Vec::with_capacity(ports.len());
        for p in ports {
            let dir = p.dir.ok_or(HdlError::Parse {
                line: p.span.line,
                col: p.span.col,
                msg: format!("port `{}` has no direction", p.name),
            })?;
            done.push(Port {
                name: p.name,
                dir,
                is_reg: p.is_reg,
                range: p.range,
                span: p.span,
            });
        }
        Ok(Module {
            name,
            ports: done,
            items,
            span,
        })
    }

    fn parse_port_list(&mut self, ports: &mut Vec<PendingPort>) -> Result<(), HdlError> {
        if matches!(&self.peek().tok, Tok::Ident(_)) {
            // Header is a plain name list; directions come from body decls.
            loop {
                let (name, span) = self.expect_ident()?;
                self.declare_port(ports, name, span)?;
                if !self.eat_sym(",") {
                    return Ok(());
                }
            }
        }
        // Directions in the header.
        let mut dir: Option<Dir> = None;
        let mut is_reg = false;
        let mut range: Option<Range> = None;
        loop {
            if self.at_kw("inout") {
                return Err(self.unsupported("inout port"));
            }
            if self.at_kw("input") || self.at_kw("output") {
                let d = if self.eat_kw("input") {
                    Dir::Input
                } else {
                    self.bump();
                    Dir::Output
                };
                is_reg = self.eat_kw("reg");
                if self.at_kw("signed") {
                    return Err(self.unsupported("signed declaration"));
                }
                range = if self.at_sym("[") {
                    Some(self.parse_range()?)
                } else {
                    None
                };
                dir = Some(d);
            } else if dir.is_none() {
                return Err(self.expected(&["input", "output"]));
            }
            let (name, span) = self.expect_ident()?;
            self.declare_port(ports, name.clone(), span)?;
            let p = ports.last_mut().unwrap();
            p.dir = dir;
            p.is_reg = is_reg;
            p.range = range.clone();
            if !self.eat_sym(",") {
                return Ok(());
            }
        }
    }

    fn declare_port(
        &self,
        ports: &mut Vec<PendingPort>,
        name: String,
        span: Span,
    ) -> Result<(), HdlError> {
        if ports.iter().any(|p| p.name == name) {
            return Err(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("duplicate port `{name}`"),
            });
        }
        ports.push(PendingPort {
            name,
            dir: None,
            is_reg: false,
            range: None,
            span,
        });
        Ok(())
    }

    fn parse_range(&mut self) -> Result<Range, HdlError> {
        let span = self.span();
        self.expect_sym("[")?;
        let msb = self.parse_expr()?;
        self.expect_sym(":")?;
        let lsb = self.parse_expr()?;
        self.expect_sym("]")?;
        Ok(Range { msb, lsb, span })
    }

    fn parse_item(
        &mut self,
        ports: &mut Vec<PendingPort>,
        items: &mut Vec<Item>,
    ) -> Result<(), HdlError> {
        match &self.peek().tok {
            Tok::Kw("input") | Tok::Kw("output") => self.parse_dir_decl(ports),
            Tok::Kw("inout") => Err(self.unsupported("inout port")),
            Tok::Kw("wire") => self.parse_net_decl(NetKind::Wire, ports, items),
            Tok::Kw("reg") => self.parse_net_decl(NetKind::Reg, ports, items),
            Tok::Kw("integer") => self.parse_net_decl(NetKind::Integer, ports, items),
            Tok::Kw("localparam") => self.parse_localparam(items),
            Tok::Kw("assign") => self.parse_assign_item(items),
            Tok::Kw("always") => self.parse_always(items),
            Tok::Kw("initial") => {
                self.tb_only("initial block")?;
                let span = self.span();
                self.bump();
                let body = self.parse_stmt()?;
                items.push(Item::Initial { body, span });
                Ok(())
            }
            Tok::Ident(_) => self.parse_instance(items),
            Tok::Kw("parameter") => Err(self.unsupported("parameter declaration")),
            Tok::Kw("generate") | Tok::Kw("genvar") | Tok::Kw("endgenerate") => {
                Err(self.unsupported("generate block"))
            }
            Tok::Kw("function") => Err(self.unsupported("function declaration")),
            Tok::Kw("task") => Err(self.unsupported("task declaration")),
            Tok::Kw("defparam") => Err(self.unsupported("defparam")),
            Tok::Kw("specify") => Err(self.unsupported("specify block")),
            Tok::Kw("real") | Tok::Kw("time") => Err(self.unsupported("real/time declaration")),
            Tok::Kw(
                k @ ("and" | "or" | "not" | "nand" | "nor" | "xor" | "xnor" | "buf"),
            ) => Err(self.unsupported(format!("gate primitive `{k}`"))),
            _ => Err(self.expected(&["module item"])),
        }
    }

    fn parse_dir_decl(&mut self, ports: &mut Vec<PendingPort>) -> Result<(), HdlError> {
        let dir = if self.eat_kw("input") {
            Dir::Input
        } else {
            self.expect_kw("output")?;
            Dir::Output
        };
        let is_reg = self.eat_kw("reg");
        let range = if self.at_sym("[") {
            Some(self.parse_range()?)
        } else {
            None
        };
        loop {
            let (name, span) = self.expect_ident()?;
            let port = ports.iter_mut().find(|p| p.name == name).ok_or(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("direction declared for `{name}` which is not in the port list"),
            })?;
            if port.dir.is_some() {
                return Err(HdlError::Parse {
                    line: span.line,
                    col: span.col,
                    msg: format!("duplicate direction for port `{name}`"),
                });
            }
            port.dir = Some(dir);
            port.is_reg = is_reg;
            port.range = range.clone();
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn parse_net_decl(
        &mut self,
        kind: NetKind,
        ports: &mut Vec<PendingPort>,
        items: &mut Vec<Item>,
    ) -> Result<(), HdlError> {
        self.bump();
        if self.at_kw("signed") {
            return Err(self.unsupported("signed declaration"));
        }
        let range = if kind != NetKind::Integer && self.at_sym("[") {
            Some(self.parse_range()?)
        } else {
            None
        };
        loop {
            let (name, span) = self.expect_ident()?;
            if self.at_sym("[") {
                return Err(self.unsupported("memory declaration"));
            }
            let init = if self.eat_sym("=") {
                if kind != NetKind::Wire {
                    return Err(self.unsupported("variable initializer"));
                }
                Some(self.parse_expr()?)
            } else {
                None
            };
            if let Some(port) = ports.iter_mut().find(|p| p.name == name) {
                // Redeclaration of a port: `wire` restates it, `reg` marks an
                // output as procedurally driven. Ranges must agree.
                if init.is_some() {
                    return Err(HdlError::Parse {
                        line: span.line,
                        col: span.col,
                        msg: format!("initializer on port `{name}`"),
                    });
                }
                let conflict = match (&port.range, &range) {
                    (Some(a), Some(b)) => a != b,
                    (None, None) => false,
                    (Some(_), None) | (None, Some(_)) => port.dir.is_some(),
                };
                if conflict {
                    return Err(HdlError::Parse {
                        line: span.line,
                        col: span.col,
                        msg: format!("conflicting range in redeclaration of port `{name}`"),
                    });
                }
                match kind {
                    NetKind::Wire => {}
                    NetKind::Reg => {
                        if port.is_reg {
                            return Err(HdlError::Parse {
                                line: span.line,
                                col: span.col,
                                msg: format!("duplicate reg declaration for port `{name}`"),
                            });
                        }
                        port.is_reg = true;
                    }
                    NetKind::Integer => {
                        return Err(HdlError::Parse {
                            line: span.line,
                            col: span.col,
                            msg: format!("port `{name}` redeclared as integer"),
                        });
                    }
                }
                if port.range.is_none() {
                    port.range = range.clone();
                }
            } else {
                items.push(Item::Net(NetDecl {
                    name: name.clone(),
                    kind,
                    range: range.clone(),
                    span,
                }));
                if let Some(rhs) = init {
                    items.push(Item::Assign {
                        lhs: LValue::Ident { name, span },
                        rhs,
                        span,
                    });
                }
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn parse_localparam(&mut self, items: &mut Vec<Item>) -> Result<(), HdlError> {
        self.bump();
        if self.at_sym("[") {
            return Err(self.unsupported("localparam range"));
        }
        loop {
            let (name, span) = self.expect_ident()?;
            self.expect_sym("=")?;
            let value = self.parse_expr()?;
            items.push(Item::Localparam { name, value, span });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(";")?;
        Ok(())
    }

    fn parse_assign_item(&mut self, items: &mut Vec<Item>) -> Result<(), HdlError> {
        let span = self.span();
        self.bump();
        if self.at_sym("#") {
            return Err(self.unsupported("assignment delay"));
        }
        let lhs = self.parse_lvalue()?;
        self.expect_sym("=")?;
        let rhs = self.parse_expr()?;
        self.expect_sym(";")?;
        items.push(Item::Assign { lhs, rhs, span });
        Ok(())
    }

    fn parse_always(&mut self, items: &mut Vec<Item>) -> Result<(), HdlError> {
        let span = self.span();
        self.bump();
        if !self.at_sym("@") {
            return Err(self.unsupported("always block without sensitivity list"));
        }
        let sens = self.parse_sensitivity()?;
        let body = self.parse_stmt()?;
        items.push(Item::Always { sens, body, span });
        Ok(())
    }

    fn parse_sensitivity(&mut self) -> Result<Sensitivity, HdlError> {
        let span = self.span();
        self.expect_sym("@")?;
        if self.eat_sym("*") {
            return Ok(Sensitivity::Comb(span));
        }
        self.expect_sym("(")?;
        if self.eat_sym("*") {
            self.expect_sym(")")?;
            return Ok(Sensitivity::Comb(span));
        }
        let mut edges = Vec::new();
        let mut names = 0usize;
        loop {
            if self.at_kw("posedge") || self.at_kw("negedge") {
                let kind = if self.eat_kw("posedge") {
                    EdgeKind::Pos
                } else {
                    self.bump();
                    EdgeKind::Neg
                };
                let (name, _) = self.expect_ident()?;
                edges.push((kind, name));
            } else if matches!(&self.peek().tok, Tok::Ident(_)) {
                self.bump();
                names += 1;
            } else {
                return Err(self.expected(&["posedge", "negedge", "identifier"]));
            }
            if self.eat_kw("or") || self.eat_sym(",") {
                continue;
            }
            break;
        }
        self.expect_sym(")")?;
        if !edges.is_empty() && names > 0 {
            return Err(self.unsupported("mixed edge and level sensitivity"));
        }
        if edges.is_empty() {
            // A plain name list is treated as combinational.
            Ok(Sensitivity::Comb(span))
        } else {
            Ok(Sensitivity::Edges { edges, span })
        }
    }

    fn parse_instance(&mut self, items: &mut Vec<Item>) -> Result<(), HdlError> {
        let span = self.span();
        let (module, _) = self.expect_ident()?;
        if self.at_sym("#") {
            return Err(self.unsupported("parameter override"));
        }
        if !matches!(&self.peek().tok, Tok::Ident(_)) {
            return Err(self.expected(&["instance name"]));
        }
        let (name, _) = self.expect_ident()?;
        if self.at_sym("[") {
            return Err(self.unsupported("instance array"));
        }
        self.expect_sym("(")?;
        let conns = if self.at_sym(")") {
            Conns::Positional(Vec::new())
        } else if self.at_sym(".") {
            let mut list = Vec::new();
            loop {
                self.expect_sym(".")?;
                let (port, _) = self.expect_ident()?;
                self.expect_sym("(")?;
                let expr = if self.at_sym(")") {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect_sym(")")?;
                list.push((port, expr));
                if !self.eat_sym(",") {
                    break;
                }
            }
            Conns::Named(list)
        } else {
            let mut list = Vec::new();
            loop {
                list.push(self.parse_expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            Conns::Positional(list)
        };
        self.expect_sym(")")?;
        self.expect_sym(";")?;
        items.push(Item::Instance {
            module,
            name,
            conns,
            span,
        });
        Ok(())
    }

    fn parse_stmt(&mut self) -> Result<Stmt, HdlError> {
        let span = self.span();
        match &self.peek().tok {
            Tok::Kw("begin") => {
                self.bump();
                if self.at_sym(":") {
                    return Err(self.unsupported("named block"));
                }
                let mut stmts = Vec::new();
                while !self.eat_kw("end") {
                    if self.at_eof() {
                        return Err(self.expected(&["end"]));
                    }
                    stmts.push(self.parse_stmt()?);
                }
                Ok(Stmt::Block { stmts, span })
            }
            Tok::Kw("if") => {
                self.bump();
                self.expect_sym("(")?;
                let cond = self.parse_expr()?;
                self.expect_sym(")")?;
                let then_s = Box::new(self.parse_stmt()?);
                let else_s = if self.eat_kw("else") {
                    Some(Box::new(self.parse_stmt()?))
                } else {
                    None
                };
                Ok(Stmt::If {
                    cond,
                    then_s,
                    else_s,
                    span,
                })
            }
            Tok::Kw("case") | Tok::Kw("casez") => self.parse_case(span),
            Tok::Kw("casex") => Err(self.unsupported("casex statement")),
            Tok::Sym("#") => {
                self.tb_only("delay control")?;
                self.bump();
                let amount = self.parse_delay_amount()?;
                let then_s = if self.eat_sym(";") {
                    None
                } else {
                    Some(Box::new(self.parse_stmt()?))
                };
                Ok(Stmt::Delay {
                    amount,
                    then_s,
                    span,
                })
            }
            Tok::Kw("for") => {
                self.tb_only("for loop")?;
                self.bump();
                self.expect_sym("(")?;
                let (var, _) = self.expect_ident()?;
                self.expect_sym("=")?;
                let init = self.parse_expr()?;
                self.expect_sym(";")?;
                let cond = self.parse_expr()?;
                self.expect_sym(";")?;
                let (step_var, _) = self.expect_ident()?;
                self.expect_sym("=")?;
                let step = self.parse_expr()?;
                self.expect_sym(")")?;
                let body = Box::new(self.parse_stmt()?);
                Ok(Stmt::For {
                    var,
                    init,
                    cond,
                    step_var,
                    step,
                    body,
                    span,
                })
            }
            Tok::Kw(k @ ("while" | "repeat" | "forever" | "fork" | "wait" | "disable")) => {
                Err(self.unsupported(format!("`{k}` statement")))
            }
            Tok::Kw(k @ ("wire" | "reg" | "integer")) => {
                Err(self.unsupported(format!("`{k}` declaration inside a block")))
            }
            Tok::SysIdent(name) => {
                let name = name.clone();
                self.parse_sys_stmt(&name, span)
            }
            Tok::Sym(";") => {
                self.bump();
                Ok(Stmt::Empty { span })
            }
            Tok::Ident(_) | Tok::Sym("{") => {
                let lhs = self.parse_lvalue()?;
                let nonblocking = if self.eat_sym("=") {
                    false
                } else if self.eat_sym("<=") {
                    true
                } else {
                    return Err(self.expected(&["=", "<="]));
                };
                if self.at_sym("#") {
                    return Err(self.unsupported("assignment delay"));
                }
                let rhs = self.parse_expr()?;
                self.expect_sym(";")?;
                Ok(Stmt::Assign {
                    lhs,
                    rhs,
                    nonblocking,
                    span,
                })
            }
            _ => Err(self.expected(&["statement"])),
        }
    }

    fn parse_delay_amount(&mut self) -> Result<u64, HdlError> {
        match &self.peek().tok {
            Tok::Number(raw) if !raw.contains('\'') => {
                let raw = raw.clone();
                let amount = raw
                    .replace('_', "")
                    .parse::<u64>()
                    .map_err(|_| self.err_here(format!("invalid delay amount `{raw}`")))?;
                self.bump();
                Ok(amount)
            }
            _ => Err(self.expected(&["delay amount"])),
        }
    }

    fn parse_case(&mut self, span: Span) -> Result<Stmt, HdlError> {
        let kind = if self.eat_kw("case") {
            CaseKind::Case
        } else {
            self.expect_kw("casez")?;
            CaseKind::Casez
        };
        self.expect_sym("(")?;
        let subject = self.parse_expr()?;
        self.expect_sym(")")?;
        let mut arms = Vec::new();
        let mut default: Option<Box<Stmt>> = None;
        loop {
            if self.eat_kw("endcase") {
                break;
            }
            if self.at_eof() {
                return Err(self.expected(&["endcase"]));
            }
            if self.at_kw("default") {
                let dspan = self.span();
                self.bump();
                self.eat_sym(":");
                if default.is_some() {
                    return Err(HdlError::Parse {
                        line: dspan.line,
                        col: dspan.col,
                        msg: "duplicate default arm".to_string(),
                    });
                }
                default = Some(Box::new(self.parse_stmt()?));
                continue;
            }
            let aspan = self.span();
            let mut labels = vec![self.parse_expr()?];
            while self.eat_sym(",") {
                labels.push(self.parse_expr()?);
            }
            self.expect_sym(":")?;
            let body = self.parse_stmt()?;
            arms.push(CaseArm {
                labels,
                body,
                span: aspan,
            });
        }
        Ok(Stmt::Case {
            kind,
            subject,
            arms,
            default,
            span,
        })
    }

    fn parse_sys_stmt(&mut self, name: &str, span: Span) -> Result<Stmt, HdlError> {
        match name {
            "display" | "write" => {
                self.tb_only(&format!("system task `${name}`"))?;
                let task = if name == "display" {
                    DisplayKind::Display
                } else {
                    DisplayKind::Write
                };
                self.bump();
                self.expect_sym("(")?;
                let format = match &self.peek().tok {
                    Tok::Str(s) => {
                        let s = s.clone();
                        self.bump();
                        s
                    }
                    _ => return Err(self.expected(&["format string"])),
                };
                let mut args = Vec::new();
                while self.eat_sym(",") {
                    args.push(self.parse_expr()?);
                }
                self.expect_sym(")")?;
                self.expect_sym(";")?;
                Ok(Stmt::Display {
                    task,
                    format,
                    args,
                    span,
                })
            }
            "finish" => {
                self.tb_only("system task `$finish`")?;
                self.bump();
                if self.eat_sym("(") {
                    self.parse_delay_amount()?;
                    self.expect_sym(")")?;
                }
                self.expect_sym(";")?;
                Ok(Stmt::Finish { span })
            }
            other => Err(self.unsupported(format!("system task `${other}`"))),
        }
    }

    fn parse_lvalue(&mut self) -> Result<LValue, HdlError> {
        let span = self.span();
        if self.eat_sym("{") {
            let mut parts = Vec::new();
            loop {
                parts.push(self.parse_lvalue()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("}")?;
            return Ok(LValue::Concat { parts, span });
        }
        let (base, _) = self.expect_ident()?;
        if !self.eat_sym("[") {
            return Ok(LValue::Ident { name: base, span });
        }
        let first = self.parse_expr()?;
        if self.at_sym("+:") || self.at_sym("-:") {
            return Err(self.unsupported("indexed part select"));
        }
        let lv = if self.eat_sym(":") {
            let lsb = self.parse_expr()?;
            LValue::Part {
                base,
                msb: Box::new(first),
                lsb: Box::new(lsb),
                span,
            }
        } else {
            LValue::Bit {
                base,
                index: Box::new(first),
                span,
            }
        };
        self.expect_sym("]")?;
        if self.at_sym("[") {
            return Err(self.unsupported("multi-dimensional select"));
        }
        Ok(lv)
    }

    fn parse_expr(&mut self) -> Result<Expr, HdlError> {
        let span = self.span();
        let cond = self.parse_binary(0)?;
        if !self.eat_sym("?") {
            return Ok(cond);
        }
        let then_e = self.parse_expr()?;
        self.expect_sym(":")?;
        let else_e = self.parse_expr()?;
        Ok(Expr::Ternary {
            cond: Box::new(cond),
            then_e: Box::new(then_e),
            else_e: Box::new(else_e),
            span,
        })
    }

    fn binary_op_at(&self, level: usize) -> Option<BinaryOp> {
        const LEVELS: &[&[(&str, BinaryOp)]] = &[
            &[("||", BinaryOp::LogOr)],
            &[("&&", BinaryOp::LogAnd)],
            &[("|", BinaryOp::Or)],
            &[
                ("^", BinaryOp::Xor),
                ("~^", BinaryOp::Xnor),
                ("^~", BinaryOp::Xnor),
            ],
            &[("&", BinaryOp::And)],
            &[
                ("==", BinaryOp::Eq),
                ("!=", BinaryOp::Neq),
                ("===", BinaryOp::CaseEq),
                ("!==", BinaryOp::CaseNeq),
            ],
            &[
                ("<", BinaryOp::Lt),
                ("<=", BinaryOp::Le),
                (">", BinaryOp::Gt),
                (">=", BinaryOp::Ge),
            ],
            &[
                ("<<", BinaryOp::Shl),
                (">>", BinaryOp::Shr),
                ("<<<", BinaryOp::Shl),
                (">>>", BinaryOp::Shr),
            ],
            &[("+", BinaryOp::Add), ("-", BinaryOp::Sub)],
            &[("*", BinaryOp::Mul), ("/", BinaryOp::Div), ("%", BinaryOp::Mod)],
        ];
        let table = LEVELS.get(level)?;
        match &self.peek().tok {
            Tok::Sym(s) => table.iter().find(|(t, _)| t == s).map(|&(_, op)| op),
            _ => None,
        }
    }

    const BINARY_LEVELS: usize = 10;

    fn parse_binary(&mut self, level: usize) -> Result<Expr, HdlError> {
        if level >= Self::BINARY_LEVELS {
            return self.parse_unary();
        }
        let mut lhs = self.parse_binary(level + 1)?;
        while let Some(op) = self.binary_op_at(level) {
            let span = self.span();
            self.bump();
            let rhs = self.parse_binary(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
        if self.at_sym("**") {
            return Err(self.unsupported("power operator"));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, HdlError> {
        let span = self.span();
        let op = match &self.peek().tok {
            Tok::Sym("~") => Some(UnaryOp::Not),
            Tok::Sym("!") => Some(UnaryOp::LogNot),
            Tok::Sym("-") => Some(UnaryOp::Neg),
            Tok::Sym("&") => Some(UnaryOp::RedAnd),
            Tok::Sym("|") => Some(UnaryOp::RedOr),
            Tok::Sym("^") => Some(UnaryOp::RedXor),
            Tok::Sym("~&") => Some(UnaryOp::RedNand),
            Tok::Sym("~|") => Some(UnaryOp::RedNor),
            Tok::Sym("~^") | Tok::Sym("^~") => Some(UnaryOp::RedXnor),
            Tok::Sym("+") => {
                // Unary plus is an identity; drop it.
                self.bump();
                return self.parse_unary();
            }
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let arg = self.parse_unary()?;
            return Ok(Expr::Unary {
                op,
                arg: Box::new(arg),
                span,
            });
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, HdlError> {
        let span = self.span();
        match &self.peek().tok {
            Tok::Number(raw) => {
                let raw = raw.clone();
                if let Err(msg) = parse_literal(&raw) {
                    return Err(self.err_here(msg));
                }
                self.bump();
                Ok(Expr::Literal { raw, span })
            }
            Tok::Str(_) => {
                self.tb_only("string literal")?;
                let t = self.bump();
                match t.tok {
                    Tok::Str(value) => Ok(Expr::Str { value, span }),
                    _ => unreachable!(),
                }
            }
            Tok::Ident(_) => {
                let (name, _) = self.expect_ident()?;
                if self.at_sym("(") {
                    return Err(self.unsupported("function call"));
                }
                if !self.eat_sym("[") {
                    return Ok(Expr::Ident { name, span });
                }
                let first = self.parse_expr()?;
                if self.at_sym("+:") || self.at_sym("-:") {
                    return Err(self.unsupported("indexed part select"));
                }
                let e = if self.eat_sym(":") {
                    let lsb = self.parse_expr()?;
                    Expr::Part {
                        base: name,
                        msb: Box::new(first),
                        lsb: Box::new(lsb),
                        span,
                    }
                } else {
                    Expr::Bit {
                        base: name,
                        index: Box::new(first),
                        span,
                    }
                };
                self.expect_sym("]")?;
                if self.at_sym("[") {
                    return Err(self.unsupported("multi-dimensional select"));
                }
                Ok(e)
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.parse_expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                self.bump();
                let first = self.parse_expr()?;
                if self.at_sym("{") {
                    // Replication: {count{parts}}.
                    self.bump();
                    let mut parts = vec![self.parse_expr()?];
                    while self.eat_sym(",") {
                        parts.push(self.parse_expr()?);
                    }
                    self.expect_sym("}")?;
                    self.expect_sym("}")?;
                    let inner = if parts.len() == 1 {
                        parts.pop().unwrap()
                    } else {
                        Expr::Concat { parts, span }
                    };
                    return Ok(Expr::Repeat {
                        count: Box::new(first),
                        inner: Box::new(inner),
                        span,
                    });
                }
                let mut parts = vec![first];
                while self.eat_sym(",") {
                    parts.push(self.parse_expr()?);
                }
                self.expect_sym("}")?;
                Ok(Expr::Concat { parts, span })
            }
            Tok::SysIdent(name) => Err(self.unsupported(format!("system function `${name}`"))),
            _ => Err(self.expected(&["expression"])),
        }
    }
}

/// Semantic checks for the strict subset: every referenced identifier is
/// declared, ranges and part selects are constant, continuous assignments
/// drive nets, procedural assignments drive regs, inputs are never assigned.
fn validate_module(m: &Module) -> Result<(), HdlError> {
    let mut v = Validator::default();
    for p in &m.ports {
        v.declare(&p.name, p.span, SigClass::Port(p.dir, p.is_reg))?;
    }
    for item in &m.items {
        match item {
            Item::Net(d) => {
                let class = match d.kind {
                    NetKind::Wire => SigClass::Net(false),
                    NetKind::Reg | NetKind::Integer => SigClass::Net(true),
                };
                v.declare(&d.name, d.span, class)?;
            }
            Item::Localparam { name, value, span } => {
                v.declare(name, *span, SigClass::Param)?;
                let val = const_eval(value, &v.params).ok_or(HdlError::Parse {
                    line: span.line,
                    col: span.col,
                    msg: format!("localparam `{name}` is not a constant expression"),
                })?;
                v.params.insert(name.clone(), val);
            }
            _ => {}
        }
    }
    for p in &m.ports {
        v.check_range(&p.name, p.range.as_ref(), p.span)?;
    }
    for item in &m.items {
        match item {
            Item::Net(d) => v.check_range(&d.name, d.range.as_ref(), d.span)?,
            Item::Assign { lhs, rhs, .. } => {
                v.check_lvalue(lhs, false)?;
                v.check_expr(rhs)?;
            }
            Item::Always { sens, body, .. } => {
                if let Sensitivity::Edges { edges, span } = sens {
                    for (_, name) in edges {
                        if !v.is_signal(name) {
                            return Err(HdlError::Parse {
                                line: span.line,
                                col: span.col,
                                msg: format!("undeclared identifier `{name}` in sensitivity list"),
                            });
                        }
                    }
                }
                v.check_stmt(body)?;
            }
            Item::Instance { conns, .. } => match conns {
                Conns::Named(list) => {
                    for (_, e) in list.iter() {
                        if let Some(e) = e {
                            v.check_expr(e)?;
                        }
                    }
                }
                Conns::Positional(list) => {
                    for e in list {
                        v.check_expr(e)?;
                    }
                }
            },
            Item::Localparam { .. } | Item::Initial { .. } => {}
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum SigClass {
    Port(Dir, bool),
    /// true = procedural storage (reg/integer).
    Net(bool),
    Param,
}

#[derive(Default)]
struct Validator {
    classes: HashMap<String, SigClass>,
    params: HashMap<String, i64>,
    order: HashSet<String>,
}

impl Validator {
    fn declare(&mut self, name: &str, span: Span, class: SigClass) -> Result<(), HdlError> {
        if !self.order.insert(name.to_string()) {
            return Err(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("duplicate declaration of `{name}`"),
            });
        }
        self.classes.insert(name.to_string(), class);
        Ok(())
    }

    fn is_signal(&self, name: &str) -> bool {
        matches!(
            self.classes.get(name),
            Some(SigClass::Port(..)) | Some(SigClass::Net(_))
        )
    }

    fn is_reg(&self, name: &str) -> bool {
        matches!(
            self.classes.get(name),
            Some(SigClass::Port(_, true)) | Some(SigClass::Net(true))
        )
    }

    fn check_range(&self, name: &str, range: Option<&Range>, span: Span) -> Result<(), HdlError> {
        if let Some(r) = range {
            for bound in [&r.msb, &r.lsb] {
                self.check_expr(bound)?;
            }
        }
        range_width(range, &self.params).ok_or(HdlError::Parse {
            line: span.line,
            col: span.col,
            msg: format!("range of `{name}` is not a valid constant range"),
        })?;
        Ok(())
    }

    fn check_expr(&self, e: &Expr) -> Result<(), HdlError> {
        match e {
            Expr::Ident { name, span } => {
                if self.classes.contains_key(name) {
                    Ok(())
                } else {
                    Err(undeclared(name, *span))
                }
            }
            Expr::Literal { .. } | Expr::Str { .. } => Ok(()),
            Expr::Unary { arg, .. } => self.check_expr(arg),
            Expr::Binary { lhs, rhs, .. } => {
                self.check_expr(lhs)?;
                self.check_expr(rhs)
            }
            Expr::Ternary {
                cond,
                then_e,
                else_e,
                ..
            } => {
                self.check_expr(cond)?;
                self.check_expr(then_e)?;
                self.check_expr(else_e)
            }
            Expr::Bit { base, index, span } => {
                if !self.is_signal(base) {
                    return Err(undeclared(base, *span));
                }
                self.check_expr(index)
            }
            Expr::Part {
                base,
                msb,
                lsb,
                span,
            } => {
                if !self.is_signal(base) {
                    return Err(undeclared(base, *span));
                }
                for bound in [msb.as_ref(), lsb.as_ref()] {
                    self.check_expr(bound)?;
                    if const_eval(bound, &self.params).is_none() {
                        return Err(HdlError::Parse {
                            line: span.line,
                            col: span.col,
                            msg: format!("part select of `{base}` has non-constant bounds"),
                        });
                    }
                }
                Ok(())
            }
            Expr::Concat { parts, .. } => {
                for p in parts {
                    self.check_expr(p)?;
                }
                Ok(())
            }
            Expr::Repeat {
                count,
                inner,
                span,
            } => {
                self.check_expr(count)?;
                if const_eval(count, &self.params).is_none() {
                    return Err(HdlError::Parse {
                        line: span.line,
                        col: span.col,
                        msg: "replication count is not constant".to_string(),
                    });
                }
                self.check_expr(inner)
            }
        }
    }

    fn check_lvalue(&self, lv: &LValue, procedural: bool) -> Result<(), HdlError> {
        match lv {
            LValue::Concat { parts, .. } => {
                for p in parts {
                    self.check_lvalue(p, procedural)?;
                }
                return Ok(());
            }
            LValue::Bit { index, .. } => self.check_expr(index)?,
            LValue::Part {
                base,
                msb,
                lsb,
                span,
            } => {
                for bound in [msb.as_ref(), lsb.as_ref()] {
                    self.check_expr(bound)?;
                    if const_eval(bound, &self.params).is_none() {
                        return Err(HdlError::Parse {
                            line: span.line,
                            col: span.col,
                            msg: format!("part select of `{base}` has non-constant bounds"),
                        });
                    }
                }
            }
            LValue::Ident { .. } => {}
        }
        let (base, span) = match lv {
            LValue::Ident { name, span } => (name, *span),
            LValue::Bit { base, span, .. } | LValue::Part { base, span, .. } => (base, *span),
            LValue::Concat { .. } => unreachable!(),
        };
        if !self.is_signal(base) {
            return Err(undeclared(base, span));
        }
        if matches!(self.classes.get(base.as_str()), Some(SigClass::Port(Dir::Input, _))) {
            return Err(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("assignment to input port `{base}`"),
            });
        }
        if procedural && !self.is_reg(base) {
            return Err(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("procedural assignment to `{base}` which is not declared reg"),
            });
        }
        if !procedural && self.is_reg(base) {
            return Err(HdlError::Parse {
                line: span.line,
                col: span.col,
                msg: format!("continuous assignment to reg `{base}`"),
            });
        }
        Ok(())
    }

    fn check_stmt(&self, s: &Stmt) -> Result<(), HdlError> {
        match s {
            Stmt::Block { stmts, .. } => {
                for s in stmts {
                    self.check_stmt(s)?;
                }
                Ok(())
            }
            Stmt::Assign { lhs, rhs, .. } => {
                self.check_lvalue(lhs, true)?;
                self.check_expr(rhs)
            }
            Stmt::If {
                cond,
                then_s,
                else_s,
                ..
            } => {
                self.check_expr(cond)?;
                self.check_stmt(then_s)?;
                if let Some(e) = else_s {
                    self.check_stmt(e)?;
                }
                Ok(())
            }
            Stmt::Case {
                subject,
                arms,
                default,
                ..
            } => {
                self.check_expr(subject)?;
                for arm in arms {
                    for l in &arm.labels {
                        self.check_expr(l)?;
                    }
                    self.check_stmt(&arm.body)?;
                }
                if let Some(d) = default {
                    self.check_stmt(d)?;
                }
                Ok(())
            }
            Stmt::Empty { .. } => Ok(()),
            // Testbench-only statements never reach strict validation: the
            // strict parser rejects them before this pass.
            Stmt::Delay { .. } | Stmt::For { .. } | Stmt::Display { .. } | Stmt::Finish { .. } => {
                Ok(())
            }
        }
    }
}

fn undeclared(name: &str, span: Span) -> HdlError {
    HdlError::Parse {
        line: span.line,
        col: span.col,
        msg: format!("undeclared identifier `{name}`"),
    }
}
