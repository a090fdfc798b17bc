use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub reward: f64,
    pub event: String,
}

pub fn write_jsonl<W: Write>(out: &mut W, records: &[TrajectoryRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Load(format!("trajectory line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let recs = vec![TrajectoryRecord {
            step: 3,
            agent: 1,
            x: 0.5,
            y: 1.5,
            theta: 0.1,
            v: 1.0,
            omega: -0.2,
            reward: 0.25,
            event: "none".into(),
        }];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        assert_eq!(read_jsonl(buf.as_slice()).unwrap(), recs);
        assert!(read_jsonl("{\"step\":1}\n".as_bytes()).is_err());
    }
}
