use std::collections::{BTreeSet, HashMap, HashSet};

use crate::ast::*;
use crate::printer::print_lvalue;

/// Data-flow graph. Node id = index into `nodes`; the string is the node
/// label. Edges point from value source to value sink and keep duplicates
/// (two connections = two edges).
///
/// Labels: `input:<w>` / `output:<w>` (ports), `wire` (internal nets),
/// `const` (literals and localparam reads, value-blind), `op:<name>`,
/// `mux` (ternaries, if/else and case lowering), `reg` (storage inserted for
/// edge-triggered blocks), `instance:<module>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dfg {
    pub nodes: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    /// A combinational path (regs excluded) feeds back into itself.
    pub comb_cycle: bool,
}

impl Dfg {
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for (i, label) in self.nodes.iter().enumerate() {
            out.push_str(&format!("{i} {label}\n"));
        }
        out.push_str("--\n");
        for (s, d) in &self.edges {
            out.push_str(&format!("{s} -> {d}\n"));
        }
        if self.comb_cycle {
            out.push_str("comb cycle\n");
        }
        out
    }
}

/// Module names instantiated anywhere in the module body.
pub fn instantiated_modules(m: &Module) -> BTreeSet<String> {
    m.items
        .iter()
        .filter_map(|item| match item {
            Item::Instance { module, .. } => Some(module.clone()),
            _ => None,
        })
        .collect()
}

/// Deterministic extraction. Node order: ports in header order, then used
/// internal nets in declaration order, then expression nodes in postorder,
/// left to right, item by item.
pub fn extract_dfg(m: &Module) -> Dfg {
    let mut params: HashMap<String, i64> = HashMap::new();
    for item in &m.items {
        if let Item::Localparam { name, value, .. } = item {
            if let Some(v) = const_eval(value, &params) {
                params.insert(name.clone(), v);
            }
        }
    }

    let used = collect_used(m);
    let assigned = collect_assigned(m);

    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        sig: HashMap::new(),
        params,
        assigned,
        claimed: HashSet::new(),
    };

    for p in &m.ports {
        let w = range_width(p.range.as_ref(), &b.params).unwrap_or(1);
        let id = b.push(format!("{}:{w}", p.dir));
        b.sig.insert(p.name.clone(), id);
    }
    for item in &m.items {
        if let Item::Net(d) = item {
            if used.contains(d.name.as_str()) {
                let id = b.push("wire".to_string());
                b.sig.insert(d.name.clone(), id);
            }
        }
    }

    for item in &m.items {
        match item {
            Item::Assign { lhs, rhs, .. } => {
                let val = b.build_expr(rhs);
                for base in lhs.bases() {
                    let dst = b.sig[base];
                    b.edge(val, dst);
                }
            }
            Item::Always { sens, body, .. } => b.build_always(sens, body),
            Item::Instance { module, conns, .. } => b.build_instance(module, conns),
            Item::Net(_) | Item::Localparam { .. } | Item::Initial { .. } => {}
        }
    }

    let comb_cycle = has_comb_cycle(&b.nodes, &b.edges);
    Dfg {
        nodes: b.nodes,
        edges: b.edges,
        comb_cycle,
    }
}

struct Builder {
    nodes: Vec<String>,
    edges: Vec<(usize, usize)>,
    sig: HashMap<String, usize>,
    params: HashMap<String, i64>,
    assigned: HashSet<String>,
    claimed: HashSet<String>,
}

/// Per-target value of a procedural block after control-flow lowering.
/// `Hold` means "keep the previous value": it builds no node and wires the
/// target's own node as the mux input (feedback).
#[derive(Clone)]
enum Low {
    Leaf(Expr),
    Mux {
        cond: Expr,
        then_b: Box<Low>,
        else_b: Box<Low>,
    },
    Hold,
}

/// Ordered per-shape map; the shape key is the printed lvalue so `cnt`,
/// `q[0]` and `{c, s}` are distinct targets.
#[derive(Default)]
struct Shapes(Vec<(String, LValue, Low)>);

impl Shapes {
    fn get(&self, key: &str) -> Option<&Low> {
        self.0.iter().find(|(k, _, _)| k == key).map(|(_, _, l)| l)
    }

    fn take(&mut self, key: &str) -> Option<Low> {
        let i = self.0.iter().position(|(k, _, _)| k == key)?;
        Some(self.0.remove(i).2)
    }

    fn set(&mut self, key: String, lv: LValue, low: Low) {
        match self.0.iter_mut().find(|(k, _, _)| *k == key) {
            Some(slot) => slot.2 = low,
            None => self.0.push((key, lv, low)),
        }
    }
}

fn lower_stmt(s: &Stmt, map: &mut Shapes) {
    match s {
        Stmt::Block { stmts, .. } => {
            for st in stmts {
                lower_stmt(st, map);
            }
        }
        Stmt::Assign { lhs, rhs, .. } => {
            map.set(print_lvalue(lhs), lhs.clone(), Low::Leaf(rhs.clone()));
        }
        Stmt::If {
            cond,
            then_s,
            else_s,
            ..
        } => {
            let mut mt = Shapes::default();
            lower_stmt(then_s, &mut mt);
            let mut me = Shapes::default();
            if let Some(e) = else_s {
                lower_stmt(e, &mut me);
            }
            merge(map, cond, mt, me);
        }
        Stmt::Case {
            subject,
            arms,
            default,
            ..
        } => lower_case(subject, arms, default.as_deref(), map),
        Stmt::Empty { .. } => {}
        // Testbench-only statements never appear in validated modules.
        Stmt::Delay { .. } | Stmt::For { .. } | Stmt::Display { .. } | Stmt::Finish { .. } => {}
    }
}

/// Case arms lower to an if/else chain in source order; a multi-label arm
/// folds its equality tests with `or`, left to right.
fn lower_case(subject: &Expr, arms: &[CaseArm], default: Option<&Stmt>, map: &mut Shapes) {
    let Some(arm) = arms.first() else {
        if let Some(d) = default {
            lower_stmt(d, map);
        }
        return;
    };
    let span = arm.span;
    let cond = arm
        .labels
        .iter()
        .map(|label| Expr::Binary {
            op: BinaryOp::Eq,
            lhs: Box::new(subject.clone()),
            rhs: Box::new(label.clone()),
            span,
        })
        .reduce(|a, b| Expr::Binary {
            op: BinaryOp::Or,
            lhs: Box::new(a),
            rhs: Box::new(b),
            span,
        })
        .unwrap();
    let mut mt = Shapes::default();
    lower_stmt(&arm.body, &mut mt);
    let mut me = Shapes::default();
    lower_case(subject, &arms[1..], default, &mut me);
    merge(map, &cond, mt, me);
}

fn merge(map: &mut Shapes, cond: &Expr, mut mt: Shapes, mut me: Shapes) {
    let mut order: Vec<(String, LValue)> = Vec::new();
    for (k, lv, _) in &mt.0 {
        order.push((k.clone(), lv.clone()));
    }
    for (k, lv, _) in &me.0 {
        if !order.iter().any(|(ok, _)| ok == k) {
            order.push((k.clone(), lv.clone()));
        }
    }
    for (key, lv) in order {
        let prior = map.get(&key).cloned().unwrap_or(Low::Hold);
        let then_b = match mt.take(&key) {
            Some(l) => subst_hold(l, &prior),
            None => prior.clone(),
        };
        let else_b = match me.take(&key) {
            Some(l) => subst_hold(l, &prior),
            None => prior.clone(),
        };
        map.set(
            key,
            lv,
            Low::Mux {
                cond: cond.clone(),
                then_b: Box::new(then_b),
                else_b: Box::new(else_b),
            },
        );
    }
}

/// A branch that holds falls back to whatever the target held before the
/// conditional (earlier assignment in the same block, or true feedback).
fn subst_hold(low: Low, prior: &Low) -> Low {
    match low {
        Low::Hold => prior.clone(),
        Low::Leaf(e) => Low::Leaf(e),
        Low::Mux {
            cond,
            then_b,
            else_b,
        } => Low::Mux {
            cond,
            then_b: Box::new(subst_hold(*then_b, prior)),
            else_b: Box::new(subst_hold(*else_b, prior)),
        },
    }
}

impl Builder {
    fn push(&mut self, label: String) -> usize {
        self.nodes.push(label);
        self.nodes.len() - 1
    }

    fn edge(&mut self, src: usize, dst: usize) {
        self.edges.push((src, dst));
    }

    fn build_expr(&mut self, e: &Expr) -> usize {
        match e {
            Expr::Ident { name, .. } => match self.sig.get(name) {
                Some(&id) => id,
                // Localparam read: value-blind constant.
                None => self.push("const".to_string()),
            },
            Expr::Literal { .. } => self.push("const".to_string()),
            Expr::Bit { base, index, .. } => {
                if const_eval(index, &self.params).is_some() {
                    // Constant selects read the base signal directly.
                    self.sig[base]
                } else {
                    let base_id = self.sig[base];
                    let idx = self.build_expr(index);
                    let n = self.push("op:select".to_string());
                    self.edge(base_id, n);
                    self.edge(idx, n);
                    n
                }
            }
            Expr::Part { base, .. } => self.sig[base],
            Expr::Unary { op, arg, .. } => {
                let a = self.build_expr(arg);
                let n = self.push(format!("op:{}", op.name()));
                self.edge(a, n);
                n
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.build_expr(lhs);
                let r = self.build_expr(rhs);
                let n = self.push(format!("op:{}", op.name()));
                self.edge(l, n);
                self.edge(r, n);
                n
            }
            Expr::Ternary {
                cond,
                then_e,
                else_e,
                ..
            } => {
                let c = self.build_expr(cond);
                let t = self.build_expr(then_e);
                let f = self.build_expr(else_e);
                let n = self.push("mux".to_string());
                self.edge(c, n);
                self.edge(t, n);
                self.edge(f, n);
                n
            }
            Expr::Concat { parts, .. } => {
                let ids: Vec<usize> = parts.iter().map(|p| self.build_expr(p)).collect();
                let n = self.push("op:concat".to_string());
                for id in ids {
                    self.edge(id, n);
                }
                n
            }
            Expr::Repeat { inner, .. } => {
                // The (constant) count carries no dataflow.
                let i = self.build_expr(inner);
                let n = self.push("op:repeat".to_string());
                self.edge(i, n);
                n
            }
            Expr::Str { .. } => self.push("const".to_string()),
        }
    }

    fn build_low(&mut self, low: &Low, hold: usize) -> usize {
        match low {
            Low::Leaf(e) => self.build_expr(e),
            Low::Hold => hold,
            Low::Mux {
                cond,
                then_b,
                else_b,
            } => {
                let c = self.build_expr(cond);
                let t = self.build_low(then_b, hold);
                let f = self.build_low(else_b, hold);
                let n = self.push("mux".to_string());
                self.edge(c, n);
                self.edge(t, n);
                self.edge(f, n);
                n
            }
        }
    }

    fn build_always(&mut self, sens: &Sensitivity, body: &Stmt) {
        let mut map = Shapes::default();
        lower_stmt(body, &mut map);
        for (_, lv, low) in map.0 {
            let bases: Vec<String> = lv.bases().iter().map(|s| s.to_string()).collect();
            let hold = self.sig[&bases[0]];
            let val = self.build_low(&low, hold);
            match sens {
                Sensitivity::Comb(_) => {
                    for base in &bases {
                        let dst = self.sig[base];
                        self.edge(val, dst);
                    }
                }
                Sensitivity::Edges { edges, .. } => {
                    let reg = self.push("reg".to_string());
                    self.edge(val, reg);
                    for (_, name) in edges {
                        let s = self.sig[name];
                        self.edge(s, reg);
                    }
                    for base in &bases {
                        let dst = self.sig[base];
                        self.edge(reg, dst);
                    }
                }
            }
        }
    }

    fn build_instance(&mut self, module: &str, conns: &Conns) {
        let inst = self.push(format!("instance:{module}"));
        let exprs: Vec<&Expr> = match conns {
            Conns::Named(list) => list.iter().filter_map(|(_, e)| e.as_ref()).collect(),
            Conns::Positional(list) => list.iter().collect(),
        };
        for e in exprs {
            // A bare net that nothing else drives is taken as an output of
            // this instance; everything else feeds the instance.
            if let Expr::Ident { name, .. } = e {
                if let Some(&id) = self.sig.get(name) {
                    let is_input_port = self.nodes[id].starts_with("input:");
                    if !is_input_port
                        && !self.assigned.contains(name)
                        && !self.claimed.contains(name)
                    {
                        self.claimed.insert(name.clone());
                        self.edge(inst, id);
                        continue;
                    }
                }
            }
            let src = self.build_expr(e);
            self.edge(src, inst);
        }
    }
}

fn collect_used(m: &Module) -> HashSet<String> {
    let mut used = HashSet::new();
    for item in &m.items {
        match item {
            Item::Assign { lhs, rhs, .. } => {
                for b in lhs.bases() {
                    used.insert(b.to_string());
                }
                collect_expr_idents(rhs, &mut used);
                collect_lvalue_index_idents(lhs, &mut used);
            }
            Item::Always { sens, body, .. } => {
                if let Sensitivity::Edges { edges, .. } = sens {
                    for (_, n) in edges {
                        used.insert(n.clone());
                    }
                }
                collect_stmt_idents(body, &mut used);
            }
            Item::Instance { conns, .. } => match conns {
                Conns::Named(list) => {
                    for (_, e) in list {
                        if let Some(e) = e {
                            collect_expr_idents(e, &mut used);
                        }
                    }
                }
                Conns::Positional(list) => {
                    for e in list {
                        collect_expr_idents(e, &mut used);
                    }
                }
            },
            Item::Initial { body, .. } => collect_stmt_idents(body, &mut used),
            Item::Net(_) | Item::Localparam { .. } => {}
        }
    }
    used
}

fn collect_assigned(m: &Module) -> HashSet<String> {
    let mut assigned = HashSet::new();
    fn stmt(s: &Stmt, out: &mut HashSet<String>) {
        match s {
            Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| stmt(s, out)),
            Stmt::Assign { lhs, .. } => {
                for b in lhs.bases() {
                    out.insert(b.to_string());
                }
            }
            Stmt::If {
                then_s, else_s, ..
            } => {
                stmt(then_s, out);
                if let Some(e) = else_s {
                    stmt(e, out);
                }
            }
            Stmt::Case {
                arms, default, ..
            } => {
                for a in arms {
                    stmt(&a.body, out);
                }
                if let Some(d) = default {
                    stmt(d, out);
                }
            }
            Stmt::For { var, body, .. } => {
                out.insert(var.clone());
                stmt(body, out);
            }
            Stmt::Delay { then_s, .. } => {
                if let Some(t) = then_s {
                    stmt(t, out);
                }
            }
            _ => {}
        }
    }
    for item in &m.items {
        match item {
            Item::Assign { lhs, .. } => {
                for b in lhs.bases() {
                    assigned.insert(b.to_string());
                }
            }
            Item::Always { body, .. } | Item::Initial { body, .. } => stmt(body, &mut assigned),
            _ => {}
        }
    }
    assigned
}

fn collect_expr_idents(e: &Expr, out: &mut HashSet<String>) {
    match e {
        Expr::Ident { name, .. } => {
            out.insert(name.clone());
        }
        Expr::Literal { .. } | Expr::Str { .. } => {}
        Expr::Unary { arg, .. } => collect_expr_idents(arg, out),
        Expr::Binary { lhs, rhs, .. } => {
            collect_expr_idents(lhs, out);
            collect_expr_idents(rhs, out);
        }
        Expr::Ternary {
            cond,
            then_e,
            else_e,
            ..
        } => {
            collect_expr_idents(cond, out);
            collect_expr_idents(then_e, out);
            collect_expr_idents(else_e, out);
        }
        Expr::Bit { base, index, .. } => {
            out.insert(base.clone());
            collect_expr_idents(index, out);
        }
        Expr::Part { base, msb, lsb, .. } => {
            out.insert(base.clone());
            collect_expr_idents(msb, out);
            collect_expr_idents(lsb, out);
        }
        Expr::Concat { parts, .. } => parts.iter().for_each(|p| collect_expr_idents(p, out)),
        Expr::Repeat { count, inner, .. } => {
            collect_expr_idents(count, out);
            collect_expr_idents(inner, out);
        }
    }
}

fn collect_lvalue_index_idents(lv: &LValue, out: &mut HashSet<String>) {
    match lv {
        LValue::Ident { .. } => {}
        LValue::Bit { index, .. } => collect_expr_idents(index, out),
        LValue::Part { msb, lsb, .. } => {
            collect_expr_idents(msb, out);
            collect_expr_idents(lsb, out);
        }
        LValue::Concat { parts, .. } => {
            parts.iter().for_each(|p| collect_lvalue_index_idents(p, out))
        }
    }
}

fn collect_stmt_idents(s: &Stmt, out: &mut HashSet<String>) {
    match s {
        Stmt::Block { stmts, .. } => stmts.iter().for_each(|s| collect_stmt_idents(s, out)),
        Stmt::Assign { lhs, rhs, .. } => {
            for b in lhs.bases() {
                out.insert(b.to_string());
            }
            collect_lvalue_index_idents(lhs, out);
            collect_expr_idents(rhs, out);
        }
        Stmt::If {
            cond,
            then_s,
            else_s,
            ..
        } => {
            collect_expr_idents(cond, out);
            collect_stmt_idents(then_s, out);
            if let Some(e) = else_s {
                collect_stmt_idents(e, out);
            }
        }
        Stmt::Case {
            subject,
            arms,
            default,
            ..
        } => {
            collect_expr_idents(subject, out);
            for a in arms {
                for l in &a.labels {
                    collect_expr_idents(l, out);
                }
                collect_stmt_idents(&a.body, out);
            }
            if let Some(d) = default {
                collect_stmt_idents(d, out);
            }
        }
        Stmt::Delay { then_s, .. } => {
            if let Some(t) = then_s {
                collect_stmt_idents(t, out);
            }
        }
        Stmt::For {
            var,
            init,
            cond,
            step_var,
            step,
            body,
            ..
        } => {
            out.insert(var.clone());
            out.insert(step_var.clone());
            collect_expr_idents(init, out);
            collect_expr_idents(cond, out);
            collect_expr_idents(step, out);
            collect_stmt_idents(body, out);
        }
        Stmt::Display { args, .. } => args.iter().for_each(|a| collect_expr_idents(a, out)),
        Stmt::Finish { .. } | Stmt::Empty { .. } => {}
    }
}

/// Cycle detection over the graph with reg nodes (and their edges) removed.
fn has_comb_cycle(nodes: &[String], edges: &[(usize, usize)]) -> bool {
    let n = nodes.len();
    let keep: Vec<bool> = nodes.iter().map(|l| l != "reg").collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(s, d) in edges {
        if keep[s] && keep[d] {
            adj[s].push(d);
        }
    }
    // 0 = white, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 || !keep[start] {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let w = adj[v][*next];
                *next += 1;
                match color[w] {
                    0 => {
                        color[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
            }
        }
    }
    false
}
