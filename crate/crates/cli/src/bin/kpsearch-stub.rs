//! Test double for the external SUT protocol.
//!
//! `kpsearch-stub [MODE] [--plant FILE]` where MODE is one of
//! `loopback` (default; serves the synthetic SUT), `echo` (perfect
//! predictions), `short` (one point missing), `garbage`, or `crash`.

use std::io::{BufRead, Write};
use std::process::ExitCode;

use kpsearch_core::sut::protocol::{parse_line, serve, write_line, Hello, HelloReply};
use kpsearch_core::sut::{SyntheticSut, SyntheticSutConfig};
use kpsearch_core::SystemUnderTest;

fn synthetic(plant: Option<&str>) -> Result<SyntheticSut, String> {
    match plant {
        None => Ok(SyntheticSut::default_plant()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            let cfg = SyntheticSutConfig::from_json(&text).map_err(|e| e.to_string())?;
            SyntheticSut::new(cfg).map_err(|e| e.to_string())
        }
    }
}

/// Answers the handshake, then feeds each request line to `answer`.
fn scripted(answer: impl Fn(&str) -> Option<String>) -> Result<(), String> {
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut lines = stdin.lock().lines();
    let Some(Ok(first)) = lines.next() else { return Ok(()) };
    parse_line::<Hello>(&first, "handshake").map_err(|e| e.to_string())?;
    write_line(&mut out, &HelloReply { ok: true }).map_err(|e| e.to_string())?;
    for line in lines {
        let line = line.map_err(|e| e.to_string())?;
        match answer(&line) {
            Some(reply) => {
                writeln!(out, "{reply}").and_then(|()| out.flush()).map_err(|e| e.to_string())?;
            }
            None => return Err("exiting on request".into()),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let plant = args.iter().position(|a| a == "--plant").and_then(|i| args.get(i + 1)).map(String::as_str);
    let mode = args.iter().find(|a| !a.starts_with("--") && Some(a.as_str()) != plant).map_or("loopback", String::as_str);

    let result = synthetic(plant).and_then(|sut| match mode {
        "loopback" => {
            let stdin = std::io::stdin();
            serve(&sut, stdin.lock(), std::io::stdout().lock()).map(|_| ()).map_err(|e| e.to_string())
        }
        "echo" | "short" => scripted(|line| {
            let req: kpsearch_core::sut::protocol::Request = parse_line(line, "request").ok()?;
            let test = sut.evaluate(&(&req).into()).ok()?;
            let mut truth: Vec<Option<[f64; 2]>> =
                test.truth.positions().iter().map(|p| p.map(|p| [p.x, p.y])).collect();
            if mode == "short" {
                truth.pop();
            }
            let predicted: Vec<[f64; 2]> = truth.iter().map(|p| p.unwrap_or([0.0, 0.0])).collect();
            Some(
                serde_json::json!({
                    "actual": truth,
                    "predicted": predicted,
                    "face_width": test.truth.face_width(),
                    "face_height": test.truth.face_height(),
                })
                .to_string(),
            )
        }),
        "garbage" => scripted(|_| Some("{\"actual\": [[1.0, oops".into())),
        "crash" => scripted(|_| None),
        other => Err(format!("unknown mode '{other}'")),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kpsearch-stub: {e}");
            ExitCode::FAILURE
        }
    }
}
