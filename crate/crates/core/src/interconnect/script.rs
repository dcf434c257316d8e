use std::fmt;

use serde::Serialize;

use super::message::{Bank, H2BMessage};
use super::network::{Network, ReadResult};
use super::SimError;

/// One line of an operations script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Write { site: u8, bank: Bank, word: u32, data: u32 },
    Read { site: u8, bank: Bank, word: u32 },
    Activate { site: u8 },
    Idle { cycles: u64 },
    /// An encoded request sent as is, for malformed-input tests.
    Raw { bits: u128 },
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |bank: &Bank| if *bank == Bank::User { "user" } else { "periph" };
        match self {
            Op::Write { site, bank, word, data } => write!(f, "write {site} {} {word:#x} {data:#x}", b(bank)),
            Op::Read { site, bank, word } => write!(f, "read {site} {} {word:#x}", b(bank)),
            Op::Activate { site } => write!(f, "activate {site}"),
            Op::Idle { cycles } => write!(f, "idle {cycles}"),
            Op::Raw { bits } => write!(f, "raw {bits:#x}"),
        }
    }
}

fn number(tok: &str) -> Result<u128, String> {
    let parsed = match tok.strip_prefix("0x").or_else(|| tok.strip_prefix("0X")) {
        Some(h) => u128::from_str_radix(&h.replace('_', ""), 16),
        None => tok.replace('_', "").parse(),
    };
    parsed.map_err(|_| format!("bad number `{tok}`"))
}

fn fits<T: TryFrom<u128>>(tok: &str, what: &str) -> Result<T, String> {
    T::try_from(number(tok)?).map_err(|_| format!("{what} `{tok}` out of range"))
}

fn bank(tok: &str) -> Result<Bank, String> {
    match tok {
        "user" | "u" => Ok(Bank::User),
        "periph" | "periphery" | "p" => Ok(Bank::Periphery),
        _ => Err(format!("unknown bank `{tok}`")),
    }
}

/// Parse a script. One operation per line; `#` starts a comment.
///
/// ```text
/// write <site> <user|periph> <word> <data>
/// read <site> <user|periph> <word>
/// activate <site>
/// idle <cycles>
/// raw <hex word>
/// ```
pub fn parse_ops(text: &str) -> Result<Vec<Op>, SimError> {
    let mut ops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let op = (|| -> Result<Op, String> {
            let want = |k: usize| {
                if toks.len() == k + 1 {
                    Ok(())
                } else {
                    Err(format!("`{}` takes {k} arguments, got {}", toks[0], toks.len() - 1))
                }
            };
            match toks[0] {
                "write" => {
                    want(4)?;
                    Ok(Op::Write {
                        site: fits(toks[1], "site")?,
                        bank: bank(toks[2])?,
                        word: fits(toks[3], "word")?,
                        data: fits(toks[4], "data")?,
                    })
                }
                "read" => {
                    want(3)?;
                    Ok(Op::Read { site: fits(toks[1], "site")?, bank: bank(toks[2])?, word: fits(toks[3], "word")? })
                }
                "activate" => {
                    want(1)?;
                    Ok(Op::Activate { site: fits(toks[1], "site")? })
                }
                "idle" => {
                    want(1)?;
                    Ok(Op::Idle { cycles: fits(toks[1], "cycle count")? })
                }
                "raw" => {
                    want(1)?;
                    Ok(Op::Raw { bits: number(toks[1])? })
                }
                other => Err(format!("unknown operation `{other}`")),
            }
        })()
        .map_err(|msg| SimError::Script { line: i + 1, msg })?;
        ops.push(op);
    }
    Ok(ops)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptOutcome {
    pub reads: Vec<ReadResult>,
    /// Operations refused by the controller, with their line index.
    pub rejected: Vec<(usize, String)>,
    pub cycles: u64,
}

/// Run `ops` against `net` and drain it. Reads and writes are queued without
/// waiting; activation waits for the switch-off of the previous site.
pub fn run_ops(net: &mut Network, ops: &[Op]) -> Result<ScriptOutcome, SimError> {
    let mut rejected = Vec::new();
    let drain_limit = 64 * net.timeout() + 64;
    for (i, op) in ops.iter().enumerate() {
        let res = match *op {
            Op::Write { site, bank, word, data } => net.enqueue(H2BMessage::write(site, bank, word, data)),
            Op::Read { site, bank, word } => net.enqueue(H2BMessage::read(site, bank, word)),
            Op::Activate { site } => net.drain(drain_limit * (1 + ops.len() as u64)).and_then(|_| net.activate_site(site)),
            Op::Idle { cycles } => {
                for _ in 0..cycles {
                    net.tick();
                }
                Ok(())
            }
            Op::Raw { bits } => net.enqueue_raw(bits),
        };
        match res {
            Ok(()) => {}
            Err(e @ (SimError::Protocol(_) | SimError::Malformed(_) | SimError::NoSuchSite { .. })) => {
                rejected.push((i, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    net.drain(drain_limit * (1 + ops.len() as u64))?;
    Ok(ScriptOutcome { reads: net.results().to_vec(), rejected, cycles: net.cycle() })
}
