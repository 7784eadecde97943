//! Plain-text problem files.
//!
//! ```text
//! betadelta-problem 1
//! dims,<m>,<n>
//! A
//! <row 0 as comma-separated reals>
//! ...
//! b
//! <comma-separated reals>
//! x_true
//! <comma-separated reals, or "none">
//! meta
//! delta=<real>
//! sigma=<real>
//! sigma_w=<real>
//! seed=<integer>
//! ```
//!
//! Reals are written in shortest round-trip form, so loading a written file
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use betadelta_core::{DenseMatrix, SensingProblem};

use crate::error::CliError;

const MAGIC: &str = "betadelta-problem 1";

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn real(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn join(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&real(*v));
    }
    out
}

pub fn problem_to_string(p: &SensingProblem) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "dims,{},{}", p.m(), p.n()).unwrap();
    out.push_str("A\n");
    for i in 0..p.m() {
        out.push_str(&join(p.a.row(i)));
        out.push('\n');
    }
    out.push_str("b\n");
    out.push_str(&join(&p.b));
    out.push_str("\nx_true\n");
    match &p.x_true {
        Some(x) => out.push_str(&join(x)),
        None => out.push_str("none"),
    }
    out.push_str("\nmeta\n");
    writeln!(out, "delta={}", real(p.delta)).unwrap();
    writeln!(out, "sigma={}", real(p.sigma)).unwrap();
    writeln!(out, "sigma_w={}", real(p.sigma_w)).unwrap();
    writeln!(out, "seed={}", p.seed).unwrap();
    out
}

#[derive(Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, ParseError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn expect(&mut self, tag: &str) -> Result<(), ParseError> {
        let l = self.next()?;
        if l != tag {
            return Err(self.err(format!("expected `{tag}`, found `{l}`")));
        }
        Ok(())
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.last,
            message: message.into(),
        }
    }

    fn reals(&mut self, expected: usize) -> Result<Vec<f64>, ParseError> {
        let l = self.next()?;
        parse_reals(l, expected).map_err(|m| self.err(m))
    }
}

fn parse_reals(line: &str, expected: usize) -> Result<Vec<f64>, String> {
    let values = if line.is_empty() {
        Vec::new()
    } else {
        line.split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
    };
    if values.len() != expected {
        return Err(format!(
            "expected {expected} values, found {}",
            values.len()
        ));
    }
    Ok(values)
}

pub fn problem_from_str(text: &str) -> Result<SensingProblem, ParseError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    lines.expect(MAGIC)?;
    let dims = lines.next()?;
    let (m, n) = match dims.split(',').collect::<Vec<_>>().as_slice() {
        ["dims", m, n] => (
            m.parse::<usize>().map_err(|e| lines.err(e.to_string()))?,
            n.parse::<usize>().map_err(|e| lines.err(e.to_string()))?,
        ),
        _ => return Err(lines.err("expected `dims,<m>,<n>`")),
    };
    lines.expect("A")?;
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..m {
        data.extend(lines.reals(n)?);
    }
    lines.expect("b")?;
    let b = lines.reals(m)?;
    lines.expect("x_true")?;
    let x_true = {
        let l = lines.next()?;
        if l == "none" {
            None
        } else {
            Some(parse_reals(l, n).map_err(|m| lines.err(m))?)
        }
    };
    lines.expect("meta")?;
    let (mut delta, mut sigma, mut sigma_w, mut seed) = (None, None, None, None);
    while let Ok(l) = lines.next() {
        if l.is_empty() {
            continue;
        }
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| lines.err("expected key=value"))?;
        let real = || value.parse::<f64>().map_err(|e| lines.err(e.to_string()));
        match key {
            "delta" => delta = Some(real()?),
            "sigma" => sigma = Some(real()?),
            "sigma_w" => sigma_w = Some(real()?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| lines.err(e.to_string()))?),
            _ => return Err(lines.err(format!("unknown key `{key}`"))),
        }
    }
    let delta = delta.ok_or_else(|| lines.err("missing delta"))?;
    let a = DenseMatrix::from_row_major(m, n, data).map_err(|e| lines.err(e.to_string()))?;
    let mut p = SensingProblem::new(a, b, x_true, delta).map_err(|e| lines.err(e.to_string()))?;
    p.sigma = sigma.unwrap_or(1.0);
    p.sigma_w = sigma_w.unwrap_or(0.0);
    p.seed = seed.unwrap_or(0);
    Ok(p)
}

pub fn write_problem(path: &Path, p: &SensingProblem) -> Result<(), CliError> {
    std::fs::write(path, problem_to_string(p)).map_err(|e| CliError::io(path, e))
}

pub fn load_problem(path: &Path) -> Result<SensingProblem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    problem_from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        source: e,
    })
}
