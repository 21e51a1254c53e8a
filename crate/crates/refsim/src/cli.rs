use std::fs;

use crate::ir::Design;
use crate::{compile, simulate};

const USAGE: &str = "usage: refsim compile -o <out> [--top <module>] <file>...\n       refsim run <image>";

/// Entry point for the `refsim` binary; `args` excludes the program name.
pub fn cli_main(args: &[String]) -> i32 {
    match args.first().map(String::as_str) {
        Some("compile") => cmd_compile(&args[1..]),
        Some("run") => cmd_run(&args[1..]),
        _ => {
            eprintln!("{USAGE}");
            2
        }
    }
}

fn cmd_compile(args: &[String]) -> i32 {
    let mut out: Option<String> = None;
    let mut top: Option<String> = None;
    let mut files: Vec<String> = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-o" => match it.next() {
                Some(v) => out = Some(v.clone()),
                None => {
                    eprintln!("refsim: -o needs a value\n{USAGE}");
                    return 2;
                }
            },
            "--top" => match it.next() {
                Some(v) => top = Some(v.clone()),
                None => {
                    eprintln!("refsim: --top needs a value\n{USAGE}");
                    return 2;
                }
            },
            s if s.starts_with('-') => {
                eprintln!("refsim: unknown option `{s}`\n{USAGE}");
                return 2;
            }
            _ => files.push(a.clone()),
        }
    }
    let Some(out) = out else {
        eprintln!("refsim: missing -o <out>\n{USAGE}");
        return 2;
    };
    if files.is_empty() {
        eprintln!("refsim: no input files\n{USAGE}");
        return 2;
    }

    let mut sources = Vec::new();
    for f in &files {
        match fs::read_to_string(f) {
            Ok(text) => sources.push((f.clone(), text)),
            Err(e) => {
                eprintln!("refsim: {f}: {e}");
                return 1;
            }
        }
    }
    match compile(&sources, top.as_deref()) {
        Ok(d) => {
            let json = serde_json::to_string(&d).expect("design serializes");
            if let Err(e) = fs::write(&out, json) {
                eprintln!("refsim: {out}: {e}");
                return 1;
            }
            0
        }
        Err(e) => {
            eprintln!("refsim: {e}");
            1
        }
    }
}

fn cmd_run(args: &[String]) -> i32 {
    let [image] = args else {
        eprintln!("{USAGE}");
        return 2;
    };
    let text = match fs::read_to_string(image) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("refsim: {image}: {e}");
            return 1;
        }
    };
    let design: Design = match serde_json::from_str(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("refsim: {image}: corrupt design image: {e}");
            return 1;
        }
    };
    let r = simulate(&design);
    print!("{}", r.output);
    match r.error {
        None => 0,
        Some(e) => {
            eprintln!("refsim: {e}");
            1
        }
    }
}
