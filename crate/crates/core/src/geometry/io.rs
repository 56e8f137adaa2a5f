//! ASCII point-cloud files.
//!
//! ```text
//! cloud v1 n=<count> color=<0|1> viewpoint=<x> <y> <z>
//! x y z [r g b]
//! ...
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! write-then-read reproduces the cloud exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{Frame, PointCloud, Rgb, Vec3};
use crate::error::{Error, Result};

pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 32 + 64);
    let vp = cloud.viewpoint();
    let _ = writeln!(
        out,
        "cloud v1 n={} color={} viewpoint={} {} {}",
        cloud.len(),
        u8::from(cloud.colors().is_some()),
        vp.x,
        vp.y,
        vp.z
    );
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(c) = cloud.colors() {
            let [r, g, b] = c[i];
            let _ = write!(out, " {r} {g} {b}");
        }
        out.push('\n');
    }
    out
}

/// Parses a cloud. The result is labeled with `frame`, since the file
/// format does not record one.
pub fn parse_cloud(text: &str, frame: Frame) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let hline = hline + 1;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 7 || tokens[0] != "cloud" || tokens[1] != "v1" {
        return Err(Error::parse(
            hline,
            "expected `cloud v1 n=<count> color=<0|1> viewpoint=<x> <y> <z>`",
        ));
    }
    let n: usize = keyed(tokens[2], "n", hline)?
        .parse()
        .map_err(|_| Error::parse(hline, "bad point count"))?;
    let color = match keyed(tokens[3], "color", hline)? {
        "0" => false,
        "1" => true,
        _ => return Err(Error::parse(hline, "color must be 0 or 1")),
    };
    let viewpoint = Vec3::new(
        float(keyed(tokens[4], "viewpoint", hline)?, hline)?,
        float(tokens[5], hline)?,
        float(tokens[6], hline)?,
    );

    let mut points = Vec::with_capacity(n);
    let mut colors: Vec<Rgb> = Vec::with_capacity(if color { n } else { 0 });
    let width = if color { 6 } else { 3 };
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width {
            return Err(Error::parse(
                lineno,
                format!("expected {width} fields, found {}", fields.len()),
            ));
        }
        points.push(Vec3::new(
            float(fields[0], lineno)?,
            float(fields[1], lineno)?,
            float(fields[2], lineno)?,
        ));
        if color {
            let mut rgb = [0u8; 3];
            for (c, f) in rgb.iter_mut().zip(&fields[3..]) {
                *c = f
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("bad color component `{f}`")))?;
            }
            colors.push(rgb);
        }
    }
    if points.len() != n {
        return Err(Error::parse(
            hline,
            format!("header declares {n} points, found {}", points.len()),
        ));
    }
    PointCloud::build(points, color.then_some(colors), viewpoint, frame)
}

pub fn read_cloud(path: impl AsRef<Path>, frame: Frame) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, frame)
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}

fn keyed<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(line, format!("expected `{key}=`")))
}

fn float(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("non-finite value `{s}`")));
    }
    Ok(v)
}

/// Parses `tx ty tz qw qx qy qz` from seven whitespace-separated fields.
pub(crate) fn parse_pose_fields(fields: &[&str], line: usize) -> Result<[f64; 7]> {
    if fields.len() != 7 {
        return Err(Error::parse(
            line,
            format!("expected 7 pose fields, found {}", fields.len()),
        ));
    }
    let mut v = [0.0; 7];
    for (slot, f) in v.iter_mut().zip(fields) {
        *slot = float(f, line)?;
    }
    Ok(v)
}
