use crate::ast::*;

/// Canonical text form. Printing then reparsing yields the same AST, so the
/// printer doubles as the normalizer: `parse(print(parse(x))) == parse(x)`.
pub fn print_module(m: &Module) -> String {
    let mut out = String::new();
    out.push_str("module ");
    out.push_str(&m.name);
    out.push('(');
    for (i, p) in m.ports.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&print_port(p));
    }
    out.push_str(");\n");
    for item in &m.items {
        print_item(item, 1, &mut out);
    }
    out.push_str("endmodule\n");
    out
}

pub fn print_source(src: &SourceFile) -> String {
    let mut out = String::new();
    for (i, m) in src.modules.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_module(m));
    }
    out
}

fn print_port(p: &Port) -> String {
    let mut s = p.dir.to_string();
    if p.is_reg {
        s.push_str(" reg");
    }
    if let Some(r) = &p.range {
        s.push(' ');
        s.push_str(&print_range(r));
    }
    s.push(' ');
    s.push_str(&p.name);
    s
}

fn print_range(r: &Range) -> String {
    format!("[{}:{}]", atom(&r.msb), atom(&r.lsb))
}

fn indent(level: usize) -> String {
    "  ".repeat(level)
}

fn print_item(item: &Item, level: usize, out: &mut String) {
    let ind = indent(level);
    match item {
        Item::Net(d) => {
            out.push_str(&ind);
            out.push_str(match d.kind {
                NetKind::Wire => "wire",
                NetKind::Reg => "reg",
                NetKind::Integer => "integer",
            });
            if let Some(r) = &d.range {
                out.push(' ');
                out.push_str(&print_range(r));
            }
            out.push(' ');
            out.push_str(&d.name);
            out.push_str(";\n");
        }
        Item::Localparam { name, value, .. } => {
            out.push_str(&format!("{ind}localparam {name} = {};\n", print_expr(value)));
        }
        Item::Assign { lhs, rhs, .. } => {
            out.push_str(&format!(
                "{ind}assign {} = {};\n",
                print_lvalue(lhs),
                print_expr(rhs)
            ));
        }
        Item::Always { sens, body, .. } => {
            let head = match sens {
                Sensitivity::Comb(_) => "always @(*)".to_string(),
                Sensitivity::Edges { edges, .. } => {
                    let list = edges
                        .iter()
                        .map(|(k, n)| match k {
                            EdgeKind::Pos => format!("posedge {n}"),
                            EdgeKind::Neg => format!("negedge {n}"),
                        })
                        .collect::<Vec<_>>()
                        .join(" or ");
                    format!("always @({list})")
                }
            };
            out.push_str(&ind);
            out.push_str(&head);
            push_sub(body, level, out);
        }
        Item::Initial { body, .. } => {
            out.push_str(&ind);
            out.push_str("initial");
            push_sub(body, level, out);
        }
        Item::Instance {
            module,
            name,
            conns,
            ..
        } => {
            let list = match conns {
                Conns::Named(pairs) => pairs
                    .iter()
                    .map(|(p, e)| match e {
                        Some(e) => format!(".{p}({})", print_expr(e)),
                        None => format!(".{p}()"),
                    })
                    .collect::<Vec<_>>()
                    .join(", "),
                Conns::Positional(exprs) => exprs
                    .iter()
                    .map(print_expr)
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            out.push_str(&format!("{ind}{module} {name}({list});\n"));
        }
    }
}

/// Attach a statement to a header line: blocks inline their `begin`, other
/// statements go on the next line one level deeper.
fn push_sub(s: &Stmt, level: usize, out: &mut String) {
    if let Stmt::Block { stmts, .. } = s {
        out.push_str(" begin\n");
        for st in stmts {
            print_stmt(st, level + 1, out);
        }
        out.push_str(&indent(level));
        out.push_str("end\n");
    } else {
        out.push('\n');
        print_stmt(s, level + 1, out);
    }
}

fn print_stmt(s: &Stmt, level: usize, out: &mut String) {
    let ind = indent(level);
    match s {
        Stmt::Block { stmts, .. } => {
            out.push_str(&ind);
            out.push_str("begin\n");
            for st in stmts {
                print_stmt(st, level + 1, out);
            }
            out.push_str(&ind);
            out.push_str("end\n");
        }
        Stmt::Assign {
            lhs,
            rhs,
            nonblocking,
            ..
        } => {
            let op = if *nonblocking { "<=" } else { "=" };
            out.push_str(&format!(
                "{ind}{} {op} {};\n",
                print_lvalue(lhs),
                print_expr(rhs)
            ));
        }
        Stmt::If {
            cond,
            then_s,
            else_s,
            ..
        } => {
            out.push_str(&format!("{ind}if ({})", print_expr(cond)));
            push_sub(then_s, level, out);
            if let Some(e) = else_s {
                out.push_str(&ind);
                out.push_str("else");
                if let Stmt::If { .. } = e.as_ref() {
                    // Chain: `else if (...)`.
                    let mut chained = String::new();
                    print_stmt(e, level, &mut chained);
                    out.push(' ');
                    out.push_str(chained.strip_prefix(&ind).unwrap_or(&chained));
                } else {
                    push_sub(e, level, out);
                }
            }
        }
        Stmt::Case {
            kind,
            subject,
            arms,
            default,
            ..
        } => {
            let kw = match kind {
                CaseKind::Case => "case",
                CaseKind::Casez => "casez",
            };
            out.push_str(&format!("{ind}{kw} ({})\n", print_expr(subject)));
            let aind = indent(level + 1);
            for arm in arms {
                let labels = arm
                    .labels
                    .iter()
                    .map(print_expr)
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push_str(&format!("{aind}{labels}:"));
                push_arm_body(&arm.body, level + 1, out);
            }
            if let Some(d) = default {
                out.push_str(&format!("{aind}default:"));
                push_arm_body(d, level + 1, out);
            }
            out.push_str(&format!("{ind}endcase\n"));
        }
        Stmt::Delay {
            amount, then_s, ..
        } => match then_s {
            None => out.push_str(&format!("{ind}#{amount};\n")),
            Some(t) => {
                out.push_str(&format!("{ind}#{amount}"));
                if let Stmt::Block { .. } = t.as_ref() {
                    push_sub(t, level, out);
                } else {
                    let mut inner = String::new();
                    print_stmt(t, level, &mut inner);
                    out.push(' ');
                    out.push_str(inner.strip_prefix(&ind).unwrap_or(&inner));
                }
            }
        },
        Stmt::For {
            var,
            init,
            cond,
            step_var,
            step,
            body,
            ..
        } => {
            out.push_str(&format!(
                "{ind}for ({var} = {}; {}; {step_var} = {})",
                print_expr(init),
                print_expr(cond),
                print_expr(step)
            ));
            push_sub(body, level, out);
        }
        Stmt::Display {
            task, format, args, ..
        } => {
            let name = match task {
                DisplayKind::Display => "$display",
                DisplayKind::Write => "$write",
            };
            let mut line = format!("{ind}{name}(\"{}\"", escape_str(format));
            for a in args {
                line.push_str(", ");
                line.push_str(&print_expr(a));
            }
            line.push_str(");\n");
            out.push_str(&line);
        }
        Stmt::Finish { .. } => out.push_str(&format!("{ind}$finish;\n")),
        Stmt::Empty { .. } => out.push_str(&format!("{ind};\n")),
    }
}

/// Case arm bodies inline single-line statements after the label.
fn push_arm_body(s: &Stmt, level: usize, out: &mut String) {
    if let Stmt::Block { .. } = s {
        push_sub(s, level, out);
        return;
    }
    let mut inner = String::new();
    print_stmt(s, 0, &mut inner);
    if inner.matches('\n').count() == 1 {
        out.push(' ');
        out.push_str(&inner);
    } else {
        out.push('\n');
        let mut indented = String::new();
        print_stmt(s, level + 1, &mut indented);
        out.push_str(&indented);
    }
}

fn escape_str(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out
}

pub fn print_lvalue(lv: &LValue) -> String {
    match lv {
        LValue::Ident { name, .. } => name.clone(),
        LValue::Bit { base, index, .. } => format!("{base}[{}]", atom(index)),
        LValue::Part { base, msb, lsb, .. } => {
            format!("{base}[{}:{}]", atom(msb), atom(lsb))
        }
        LValue::Concat { parts, .. } => {
            let inner = parts
                .iter()
                .map(print_lvalue)
                .collect::<Vec<_>>()
                .join(", ");
            format!("{{{inner}}}")
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Ident { name, .. } => name.clone(),
        Expr::Literal { raw, .. } => raw.clone(),
        Expr::Unary { op, arg, .. } => format!("{}{}", op.token(), atom(arg)),
        Expr::Binary { op, lhs, rhs, .. } => {
            format!("{} {} {}", atom(lhs), op.token(), atom(rhs))
        }
        Expr::Ternary {
            cond,
            then_e,
            else_e,
            ..
        } => format!("{} ? {} : {}", atom(cond), atom(then_e), atom(else_e)),
        Expr::Bit { base, index, .. } => format!("{base}[{}]", atom(index)),
        Expr::Part { base, msb, lsb, .. } => {
            format!("{base}[{}:{}]", atom(msb), atom(lsb))
        }
        Expr::Concat { parts, .. } => {
            let inner = parts
                .iter()
                .map(print_expr)
                .collect::<Vec<_>>()
                .join(", ");
            format!("{{{inner}}}")
        }
        Expr::Repeat { count, inner, .. } => {
            let parts = match inner.as_ref() {
                Expr::Concat { parts, .. } => parts
                    .iter()
                    .map(print_expr)
                    .collect::<Vec<_>>()
                    .join(", "),
                other => print_expr(other),
            };
            format!("{{{}{{{parts}}}}}", atom(count))
        }
        Expr::Str { value, .. } => format!("\"{}\"", escape_str(value)),
    }
}

/// Composite subexpressions are parenthesized so the printed form reparses
/// without relying on precedence.
fn atom(e: &Expr) -> String {
    match e {
        Expr::Unary { .. } | Expr::Binary { .. } | Expr::Ternary { .. } => {
            format!("({})", print_expr(e))
        }
        _ => print_expr(e),
    }
}
