use crate::ir::{CaseLabel, Design, Ex, Lv, St, UOp};

const SETTLE_CAP: usize = 10_000;
const EDGE_CAP: usize = 1_000;
const ZERO_DELAY_CAP: usize = 10_000;
const BUDGET: u64 = 10_000_000;

pub struct SimResult {
    pub output: String,
    /// None = clean termination ($finish or all processes done).
    pub error: Option<String>,
}

pub fn simulate(d: &Design) -> SimResult {
    let mut s = Sim {
        d,
        vals: vec![0; d.signals.len()],
        out: String::new(),
        nba: Vec::new(),
        finished: false,
        budget: BUDGET,
    };
    let error = s.run().err();
    SimResult {
        output: s.out,
        error,
    }
}

fn mask(w: u32) -> u64 {
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

enum Frame<'d> {
    Seq { stmts: &'d [St], pc: usize },
    ForLoop { st: &'d St, entered: bool },
}

enum Act<'d> {
    Pop,
    Stmt(&'d St),
    ForTurn { st: &'d St, run_step: bool },
}

enum RunOutcome {
    Done,
    Sleep(u64),
}

struct ProcState<'d> {
    frames: Vec<Frame<'d>>,
    wake: u64,
    done: bool,
}

struct Sim<'d> {
    d: &'d Design,
    vals: Vec<u64>,
    out: String,
    /// Pending nonblocking writes: (signal, bit mask, bits).
    nba: Vec<(usize, u64, u64)>,
    finished: bool,
    budget: u64,
}

impl<'d> Sim<'d> {
    fn run(&mut self) -> Result<(), String> {
        self.settle()?;
        let mut snap = self.vals.clone();

        let d = self.d;
        let mut procs: Vec<ProcState<'d>> = d
            .initials
            .iter()
            .map(|p| ProcState {
                frames: vec![Frame::Seq {
                    stmts: &p.body,
                    pc: 0,
                }],
                wake: 0,
                done: false,
            })
            .collect();

        let mut now: u64 = 0;
        loop {
            // Run every process scheduled for this time (zero delays loop back).
            let mut rounds = 0;
            loop {
                let mut ran = false;
                for p in procs.iter_mut() {
                    if p.done || p.wake != now {
                        continue;
                    }
                    ran = true;
                    match self.run_frames(&mut p.frames)? {
                        RunOutcome::Done => p.done = true,
                        RunOutcome::Sleep(amt) => p.wake = now + amt,
                    }
                    if self.finished {
                        return Ok(());
                    }
                }
                if !ran {
                    break;
                }
                rounds += 1;
                if rounds > ZERO_DELAY_CAP {
                    return Err("zero-delay loop did not settle".into());
                }
            }

            self.apply_nba()?;

            // Edge cascade: fire clocked processes until signals stop edging.
            let mut iters = 0;
            loop {
                let fired: Vec<usize> = d
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| {
                        e.sens.iter().any(|&(pos, sig)| {
                            let old = snap[sig] & 1;
                            let new = self.vals[sig] & 1;
                            if pos {
                                old == 0 && new == 1
                            } else {
                                old == 1 && new == 0
                            }
                        })
                    })
                    .map(|(i, _)| i)
                    .collect();
                snap = self.vals.clone();
                if fired.is_empty() {
                    break;
                }
                for ei in fired {
                    self.run_body(&d.edges[ei].body)?;
                    if self.finished {
                        return Ok(());
                    }
                }
                self.apply_nba()?;
                iters += 1;
                if iters > EDGE_CAP {
                    return Err("edge cascade did not settle".into());
                }
            }

            match procs.iter().filter(|p| !p.done).map(|p| p.wake).min() {
                None => return Ok(()),
                Some(t) => now = t,
            }
        }
    }

    /// Run a process until it finishes or hits a delay. Blocking writes
    /// propagate immediately; nonblocking ones queue.
    fn run_frames(&mut self, frames: &mut Vec<Frame<'d>>) -> Result<RunOutcome, String> {
        loop {
            let act: Act<'d> = match frames.last_mut() {
                None => return Ok(RunOutcome::Done),
                Some(Frame::Seq { stmts, pc }) => {
                    if *pc >= stmts.len() {
                        Act::Pop
                    } else {
                        let st = &stmts[*pc];
                        *pc += 1;
                        Act::Stmt(st)
                    }
                }
                Some(Frame::ForLoop { st, entered }) => {
                    let run_step = *entered;
                    *entered = true;
                    Act::ForTurn { st, run_step }
                }
            };
            match act {
                Act::Pop => {
                    frames.pop();
                }
                Act::ForTurn { st, run_step } => {
                    let St::For {
                        cond,
                        step_var,
                        step,
                        body,
                        ..
                    } = st
                    else {
                        unreachable!()
                    };
                    self.spend()?;
                    if run_step {
                        let v = self.eval(step, self.d.signals[*step_var].width);
                        self.write_lv(&Lv::Sig(*step_var), v);
                        self.settle()?;
                    }
                    if self.eval_cond(cond) {
                        frames.push(Frame::Seq { stmts: body, pc: 0 });
                    } else {
                        frames.pop();
                    }
                }
                Act::Stmt(st) => {
                    self.spend()?;
                    match st {
                        St::Assign {
                            lhs,
                            rhs,
                            nonblocking,
                        } => {
                            let v = self.eval(rhs, self.d.width_of_lv(lhs));
                            if *nonblocking {
                                let mut parts = Vec::new();
                                self.lv_parts(lhs, v, &mut parts);
                                self.nba.extend(parts);
                            } else {
                                self.write_lv(lhs, v);
                                self.settle()?;
                            }
                        }
                        St::If {
                            cond,
                            then_s,
                            else_s,
                        } => {
                            let branch = if self.eval_cond(cond) { then_s } else { else_s };
                            frames.push(Frame::Seq {
                                stmts: branch,
                                pc: 0,
                            });
                        }
                        St::Case {
                            subject,
                            arms,
                            default,
                        } => {
                            let body = self.select_arm(subject, arms, default);
                            frames.push(Frame::Seq { stmts: body, pc: 0 });
                        }
                        St::Delay { amount } => return Ok(RunOutcome::Sleep(*amount)),
                        St::For { var, init, .. } => {
                            let v = self.eval(init, self.d.signals[*var].width);
                            self.write_lv(&Lv::Sig(*var), v);
                            self.settle()?;
                            frames.push(Frame::ForLoop { st, entered: false });
                        }
                        St::Display {
                            newline,
                            format,
                            args,
                        } => {
                            let line = self.render(format, args)?;
                            self.out.push_str(&line);
                            if *newline {
                                self.out.push('\n');
                            }
                        }
                        St::Finish => {
                            self.finished = true;
                            frames.clear();
                            return Ok(RunOutcome::Done);
                        }
                    }
                }
            }
        }
    }

    /// Edge-process bodies run to completion in one delta (no delays inside).
    fn run_body(&mut self, body: &'d [St]) -> Result<(), String> {
        let mut frames = vec![Frame::Seq {
            stmts: body,
            pc: 0,
        }];
        match self.run_frames(&mut frames)? {
            RunOutcome::Done => Ok(()),
            RunOutcome::Sleep(_) => Err("internal: delay outside an initial block".into()),
        }
    }

    fn apply_nba(&mut self) -> Result<(), String> {
        if self.nba.is_empty() {
            return Ok(());
        }
        let writes = std::mem::take(&mut self.nba);
        for (sig, m, bits) in writes {
            self.vals[sig] = (self.vals[sig] & !m) | (bits & m);
        }
        self.settle()
    }

    /// Propagate continuous assigns and combinational always blocks to a
    /// fixpoint.
    fn settle(&mut self) -> Result<(), String> {
        let d = self.d;
        for _ in 0..SETTLE_CAP {
            let before = self.vals.clone();
            for a in &d.assigns {
                let v = self.eval(&a.rhs, d.width_of_lv(&a.lhs));
                self.write_lv(&a.lhs, v);
            }
            for c in &d.combs {
                self.exec_comb(&c.body)?;
            }
            if self.vals == before {
                return Ok(());
            }
        }
        Err("combinational logic did not converge".into())
    }

    /// Immediate (non-suspending) statement execution used inside settle.
    /// Nonblocking writes behave as blocking here.
    fn exec_comb(&mut self, stmts: &'d [St]) -> Result<(), String> {
        for st in stmts {
            self.spend()?;
            match st {
                St::Assign { lhs, rhs, .. } => {
                    let v = self.eval(rhs, self.d.width_of_lv(lhs));
                    self.write_lv(lhs, v);
                }
                St::If {
                    cond,
                    then_s,
                    else_s,
                } => {
                    let branch = if self.eval_cond(cond) { then_s } else { else_s };
                    self.exec_comb(branch)?;
                }
                St::Case {
                    subject,
                    arms,
                    default,
                } => {
                    let body = self.select_arm(subject, arms, default);
                    self.exec_comb(body)?;
                }
                St::For {
                    var,
                    init,
                    cond,
                    step_var,
                    step,
                    body,
                } => {
                    let v = self.eval(init, self.d.signals[*var].width);
                    self.write_lv(&Lv::Sig(*var), v);
                    while self.eval_cond(cond) {
                        self.spend()?;
                        self.exec_comb(body)?;
                        let v = self.eval(step, self.d.signals[*step_var].width);
                        self.write_lv(&Lv::Sig(*step_var), v);
                    }
                }
                St::Delay { .. } | St::Display { .. } | St::Finish => {
                    return Err("internal: statement not allowed in combinational context".into());
                }
            }
        }
        Ok(())
    }

    fn select_arm(
        &self,
        subject: &Ex,
        arms: &'d [(Vec<CaseLabel>, Vec<St>)],
        default: &'d [St],
    ) -> &'d [St] {
        let mut w = self.d.width_of(subject);
        for (labels, _) in arms {
            for l in labels {
                w = w.max(self.d.width_of(&l.value));
            }
        }
        let sv = self.eval(subject, w);
        for (labels, body) in arms {
            for l in labels {
                let lv = self.eval(&l.value, w);
                let keep = !l.mask;
                if sv & keep == lv & keep {
                    return body;
                }
            }
        }
        default
    }

    fn spend(&mut self) -> Result<(), String> {
        self.budget = self
            .budget
            .checked_sub(1)
            .ok_or("statement budget exceeded (runaway loop?)")?;
        Ok(())
    }

    fn eval_cond(&self, e: &Ex) -> bool {
        self.eval(e, self.d.width_of(e)) != 0
    }

    /// Evaluate at the given context width (callers pass the self-determined
    /// width as a minimum); inner operands can still widen the context.
    fn eval(&self, e: &Ex, ctx: u32) -> u64 {
        let d = self.d;
        match e {
            Ex::Const { value, width } => *value & mask(width.unwrap_or(64)),
            Ex::Sig(i) => self.vals[*i],
            Ex::Bit { sig, index } => {
                let s = &d.signals[*sig];
                let idx = self.eval(index, d.width_of(index));
                let phys = idx.wrapping_sub(u64::from(s.lsb));
                if phys < u64::from(s.width) {
                    (self.vals[*sig] >> phys) & 1
                } else {
                    0
                }
            }
            Ex::Part { sig, hi, lo } => (self.vals[*sig] >> lo) & mask(hi - lo + 1),
            Ex::Unary { op, arg } => {
                let ws = d.width_of(arg);
                match op {
                    UOp::Not => {
                        let w = ctx.max(ws);
                        !self.eval(arg, w) & mask(w)
                    }
                    UOp::Neg => {
                        let w = ctx.max(ws);
                        self.eval(arg, w).wrapping_neg() & mask(w)
                    }
                    UOp::LogNot => u64::from(self.eval(arg, ws) == 0),
                    UOp::RedAnd => u64::from(self.eval(arg, ws) == mask(ws)),
                    UOp::RedOr => u64::from(self.eval(arg, ws) != 0),
                    UOp::RedXor => u64::from(self.eval(arg, ws).count_ones() & 1),
                    UOp::RedNand => u64::from(self.eval(arg, ws) != mask(ws)),
                    UOp::RedNor => u64::from(self.eval(arg, ws) == 0),
                    UOp::RedXnor => u64::from((self.eval(arg, ws).count_ones() & 1) == 0),
                }
            }
            Ex::Binary { op, lhs, rhs } => {
                use crate::ir::BOp::*;
                let (wl, wr) = (d.width_of(lhs), d.width_of(rhs));
                match op {
                    Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                        let w = ctx.max(wl).max(wr);
                        let a = self.eval(lhs, w);
                        let b = self.eval(rhs, w);
                        let v = match op {
                            Add => a.wrapping_add(b),
                            Sub => a.wrapping_sub(b),
                            Mul => a.wrapping_mul(b),
                            Div => {
                                if b == 0 {
                                    0
                                } else {
                                    a / b
                                }
                            }
                            Mod => {
                                if b == 0 {
                                    0
                                } else {
                                    a % b
                                }
                            }
                            And => a & b,
                            Or => a | b,
                            Xor => a ^ b,
                            Xnor => !(a ^ b),
                            _ => unreachable!(),
                        };
                        v & mask(w)
                    }
                    Eq | Neq | Lt | Le | Gt | Ge => {
                        // Comparisons are self-determined at the wider operand.
                        let w = wl.max(wr);
                        let a = self.eval(lhs, w);
                        let b = self.eval(rhs, w);
                        u64::from(match op {
                            Eq => a == b,
                            Neq => a != b,
                            Lt => a < b,
                            Le => a <= b,
                            Gt => a > b,
                            Ge => a >= b,
                            _ => unreachable!(),
                        })
                    }
                    LogAnd => {
                        u64::from(self.eval(lhs, wl) != 0 && self.eval(rhs, wr) != 0)
                    }
                    LogOr => u64::from(self.eval(lhs, wl) != 0 || self.eval(rhs, wr) != 0),
                    Shl | Shr => {
                        let w = ctx.max(wl);
                        let a = self.eval(lhs, w);
                        let sh = self.eval(rhs, wr);
                        if sh >= 64 {
                            0
                        } else if *op == Shl {
                            (a << sh) & mask(w)
                        } else {
                            a >> sh
                        }
                    }
                }
            }
            Ex::Ternary {
                cond,
                then_e,
                else_e,
            } => {
                let w = ctx.max(d.width_of(then_e)).max(d.width_of(else_e));
                if self.eval_cond(cond) {
                    self.eval(then_e, w)
                } else {
                    self.eval(else_e, w)
                }
            }
            Ex::Concat { parts } => {
                let mut acc: u64 = 0;
                for p in parts {
                    let w = d.width_of(p);
                    let v = self.eval(p, w) & mask(w);
                    acc = if w >= 64 { v } else { (acc << w) | v };
                }
                acc
            }
            Ex::Repeat { count, inner } => {
                let w = d.width_of(inner);
                let v = self.eval(inner, w) & mask(w);
                let mut acc: u64 = 0;
                for _ in 0..*count {
                    acc = if w >= 64 { v } else { (acc << w) | v };
                }
                acc
            }
        }
    }

    /// Decompose a write into per-signal (mask, bits) pieces. Concat targets
    /// take the value MSB-first; out-of-range bit writes are dropped.
    fn lv_parts(&self, lv: &Lv, value: u64, out: &mut Vec<(usize, u64, u64)>) {
        let d = self.d;
        match lv {
            Lv::Sig(i) => {
                let m = mask(d.signals[*i].width);
                out.push((*i, m, value & m));
            }
            Lv::Bit { sig, index } => {
                let s = &d.signals[*sig];
                let idx = self.eval(index, d.width_of(index));
                let phys = idx.wrapping_sub(u64::from(s.lsb));
                if phys < u64::from(s.width) {
                    out.push((*sig, 1 << phys, (value & 1) << phys));
                }
            }
            Lv::Part { sig, hi, lo } => {
                let w = hi - lo + 1;
                out.push((*sig, mask(w) << lo, (value & mask(w)) << lo));
            }
            Lv::Concat(parts) => {
                let total: u32 = parts.iter().map(|p| d.width_of_lv(p)).sum();
                let mut consumed = 0;
                for p in parts {
                    let w = d.width_of_lv(p);
                    let shift = total - consumed - w;
                    self.lv_parts(p, (value >> shift) & mask(w), out);
                    consumed += w;
                }
            }
        }
    }

    fn write_lv(&mut self, lv: &Lv, value: u64) {
        let mut parts = Vec::new();
        self.lv_parts(lv, value, &mut parts);
        for (sig, m, bits) in parts {
            self.vals[sig] = (self.vals[sig] & !m) | (bits & m);
        }
    }

    fn render(&self, format: &str, args: &[Ex]) -> Result<String, String> {
        let mut s = String::new();
        let mut it = format.chars();
        let mut ai = 0;
        while let Some(c) = it.next() {
            if c != '%' {
                s.push(c);
                continue;
            }
            let mut conv = it.next().ok_or("malformed format string")?;
            if conv == '%' {
                s.push('%');
                continue;
            }
            let mut pad = true;
            if conv == '0' {
                pad = false;
                conv = it.next().ok_or("malformed format string")?;
            }
            let arg = args.get(ai).ok_or("missing format argument")?;
            ai += 1;
            let w = self.d.width_of(arg);
            let v = self.eval(arg, w);
            match conv.to_ascii_lowercase() {
                'b' => {
                    if pad {
                        s.push_str(&format!("{:0>width$b}", v, width = w as usize));
                    } else {
                        s.push_str(&format!("{v:b}"));
                    }
                }
                'd' => {
                    if pad {
                        let dw = mask(w).to_string().len();
                        s.push_str(&format!("{v:>dw$}"));
                    } else {
                        s.push_str(&v.to_string());
                    }
                }
                'h' => {
                    if pad {
                        s.push_str(&format!("{:0>width$x}", v, width = w.div_ceil(4) as usize));
                    } else {
                        s.push_str(&format!("{v:x}"));
                    }
                }
                other => return Err(format!("unsupported format conversion `%{other}`")),
            }
        }
        Ok(s)
    }
}
