//! CSV tactile logs: header `t,f1,f2,f3`, then seconds and raw counts.

use std::fmt::Write as _;
use std::path::Path;

use super::TactileFrame;
use crate::error::{Error, Result};

pub const HEADER: &str = "t,f1,f2,f3";

pub fn format_log(frames: &[TactileFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * 40 + 16);
    out.push_str(HEADER);
    out.push('\n');
    for f in frames {
        let _ = writeln!(out, "{},{},{},{}", f.t, f.raw[0], f.raw[1], f.raw[2]);
    }
    out
}

/// Parses a log. Timestamp order is not checked here; the detectors
/// reject non-increasing time.
pub fn parse_log(text: &str) -> Result<Vec<TactileFrame>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.split(',').map(str::trim).eq(HEADER.split(',')) => {}
        Some((i, _)) => return Err(Error::parse(i + 1, format!("expected header `{HEADER}`"))),
        None => return Err(Error::parse(1, "empty tactile log")),
    }
    lines
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::parse(i + 1, format!("expected 4 fields, found {}", fields.len())));
            }
            let mut v = [0.0; 4];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::parse(i + 1, format!("bad number `{f}`")))?;
            }
            Ok(TactileFrame {
                t: v[0],
                raw: [v[1], v[2], v[3]],
            })
        })
        .collect()
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<TactileFrame>> {
    let path = path.as_ref();
    parse_log(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_log(path: impl AsRef<Path>, frames: &[TactileFrame]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_log(frames)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let frames = vec![
            TactileFrame { t: 0.0, raw: [1.5, 2.0, 3.25] },
            TactileFrame { t: 0.002, raw: [500.1, 499.9, 1e-3] },
        ];
        assert_eq!(parse_log(&format_log(&frames)).unwrap(), frames);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = "t,f1,f2,f3\n0,1,2,3\n0.1,1,x,3\n";
        assert!(matches!(parse_log(bad), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_log("a,b\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_log("t,f1,f2,f3\n0,1,2\n").is_err());
    }
}
