//! Plain-text checkpoints:
//!
//! ```text
//! chemotaxis-checkpoint 1
//! step <m>
//! time <t>
//! u <n> v1 v2 ...
//! v <n> ...
//! w <n> ...
//! ```
//!
//! Floats are printed in shortest round-trip form, so reading a checkpoint
//! back gives bit-identical fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::SimState;
use crate::error::{Error, Result};
use crate::fespace::{CgField, DgField};

pub const CHECKPOINT_MAGIC: &str = "chemotaxis-checkpoint 1";

pub fn write_checkpoint(state: &SimState, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
    writeln!(out, "step {}", state.step).unwrap();
    writeln!(out, "time {}", state.time).unwrap();
    for (name, values) in [("u", &state.u.0), ("v", &state.v.0), ("w", &state.w.0)] {
        write!(out, "{name} {}", values.len()).unwrap();
        for x in values {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<SimState> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == CHECKPOINT_MAGIC => {}
        _ => return Err(err(1, format!("expected header '{CHECKPOINT_MAGIC}'"))),
    }
    let mut field = |key: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| err(0, format!("missing '{key}' line")))?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(err(no, format!("expected '{key}'")));
        }
        Ok((no, tokens.map(str::to_string).collect()))
    };
    let scalar = |no: usize, tokens: &[String], key: &str| -> Result<String> {
        match tokens {
            [v] => Ok(v.clone()),
            _ => Err(err(no, format!("'{key}' takes one value"))),
        }
    };
    let (no, t) = field("step")?;
    let step: usize = scalar(no, &t, "step")?
        .parse()
        .map_err(|e| err(no, format!("bad step: {e}")))?;
    let (no, t) = field("time")?;
    let time: f64 = scalar(no, &t, "time")?
        .parse()
        .map_err(|e| err(no, format!("bad time: {e}")))?;
    let mut arrays = Vec::new();
    for key in ["u", "v", "w"] {
        let (no, t) = field(key)?;
        let (count, rest) = t.split_first().ok_or_else(|| err(no, format!("'{key}' needs a length")))?;
        let count: usize = count.parse().map_err(|e| err(no, format!("bad length: {e}")))?;
        if rest.len() != count {
            return Err(err(no, format!("'{key}' declares {count} values but has {}", rest.len())));
        }
        let values = rest
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| err(no, format!("bad value '{s}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        arrays.push(values);
    }
    let w = arrays.pop().unwrap();
    let v = arrays.pop().unwrap();
    let u = arrays.pop().unwrap();
    Ok(SimState {
        step,
        time,
        u: DgField(u),
        v: CgField(v),
        w: CgField(w),
    })
}
