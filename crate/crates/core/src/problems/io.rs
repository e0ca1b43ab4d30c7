//! Plain-text serialization.
//!
//! Instance files start with a header of `key value` lines followed by one
//! sample per row:
//!
//! ```text
//! smod-instance 1
//! kind phase_retrieval
//! n 2
//! d 3
//! seed 42
//! f_hat 0.5
//! truth 1 0 0
//! 1 1 0 0
//! 0 0 1 0
//! ```
//!
//! `seed`, `f_hat` and `truth` take `-` when absent. Sample rows hold `b`
//! followed by `a` (phase retrieval, absolute deviation) or by `u` then
//! `v` (blind deconvolution). Reals are written in Rust's shortest
//! round-trip form, so a write/read cycle is lossless. `f_hat` is
//! recomputed from the truth on read.
//!
//! Images are 16 lines of 16 whitespace-separated reals.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{ProblemInstance, ProblemKind, Sample};
use crate::{Error, Result};

const MAGIC: &str = "smod-instance 1";

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub fn write_instance<W: Write>(inst: &ProblemInstance, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "kind {}", inst.kind.name())?;
    writeln!(w, "n {}", inst.n())?;
    writeln!(w, "d {}", inst.dim)?;
    match inst.seed {
        Some(s) => writeln!(w, "seed {s}")?,
        None => writeln!(w, "seed -")?,
    }
    match inst.f_hat {
        Some(f) => writeln!(w, "f_hat {f}")?,
        None => writeln!(w, "f_hat -")?,
    }
    match &inst.truth {
        Some(t) => writeln!(w, "truth {}", join(t))?,
        None => writeln!(w, "truth -")?,
    }
    for s in &inst.samples {
        match s {
            Sample::Quadratic { a, b } | Sample::Linear { a, b } => {
                writeln!(w, "{b} {}", join(a))?
            }
            Sample::Bilinear { u, v, b } => writeln!(w, "{b} {} {}", join(u), join(v))?,
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_reals(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| parse_err(line, format!("{t:?}: {e}"))))
        .collect()
}

pub fn read_instance<R: BufRead>(r: R) -> Result<ProblemInstance> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(Error::from(e))),
    });
    let mut next = |want: &str| -> Result<(usize, String)> {
        let (no, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, wanted {want}")))??;
        Ok((no, l))
    };
    let (no, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(parse_err(no, "missing smod-instance header"));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (no, l) = next(key)?;
        let rest = l
            .trim()
            .strip_prefix(key)
            .ok_or_else(|| parse_err(no, format!("expected `{key}`")))?;
        Ok((no, rest.trim().to_string()))
    };
    let (no, kind) = field("kind")?;
    let kind = ProblemKind::from_name(&kind).ok_or_else(|| parse_err(no, format!("unknown kind {kind}")))?;
    let (no, n) = field("n")?;
    let n: usize = n.parse().map_err(|_| parse_err(no, "bad n"))?;
    let (no, d) = field("d")?;
    let d: usize = d.parse().map_err(|_| parse_err(no, "bad d"))?;
    let (no, seed) = field("seed")?;
    let seed = match seed.as_str() {
        "-" => None,
        s => Some(s.parse::<u64>().map_err(|_| parse_err(no, "bad seed"))?),
    };
    let (_, _f_hat) = field("f_hat")?;
    let (no, truth) = field("truth")?;
    let truth = match truth.as_str() {
        "-" => None,
        s => Some(parse_reals(no, s)?),
    };

    let width = match kind {
        ProblemKind::BlindDeconvolution => 1 + 2 * d,
        _ => 1 + d,
    };
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, l) = next("sample row")?;
        let vals = parse_reals(no, &l)?;
        if vals.len() != width {
            return Err(parse_err(no, format!("expected {width} columns, got {}", vals.len())));
        }
        let b = vals[0];
        samples.push(match kind {
            ProblemKind::PhaseRetrieval => Sample::Quadratic { a: vals[1..].to_vec(), b },
            ProblemKind::AbsoluteDeviation => Sample::Linear { a: vals[1..].to_vec(), b },
            ProblemKind::BlindDeconvolution => Sample::Bilinear {
                u: vals[1..=d].to_vec(),
                v: vals[1 + d..].to_vec(),
                b,
            },
        });
    }
    let mut inst = ProblemInstance::new(kind, d, samples)?;
    if let Some(t) = truth {
        inst = inst.with_truth(t)?;
    }
    inst.seed = seed;
    Ok(inst)
}

/// Reads a 16×16 image.
pub fn read_image<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        rows.push(parse_reals(i + 1, &l)?);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.len() != 16 || rows.iter().any(|r| r.len() != 16) {
        return Err(Error::ImageShape { rows: rows.len(), cols });
    }
    Ok(rows)
}

/// Writes a matrix as whitespace-separated rows.
pub fn write_matrix<W: Write>(m: &[Vec<f64>], mut w: W) -> Result<()> {
    for row in m {
        writeln!(w, "{}", join(row))?;
    }
    Ok(())
}
