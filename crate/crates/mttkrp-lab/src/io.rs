//! Problem files and the small spec grammars used on the command line.
//!
//! A problem file is plain text: a header line `N I_1 ... I_N R n` (mode
//! `n` is 1-based), the tensor entries in linearization order (mode 1
//! fastest), then each input factor matrix row-major in ascending mode
//! order. A `synthetic:` spec `d1,...,dN:R[@seed]` is accepted anywhere a
//! file path is; dimension lists allow a repeat shorthand (`4096^3`).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::parsim::ProcessorGrid;
use crate::tensor::{DenseTensor, FactorMatrix, MttkrpProblem};

pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let mut dims = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(Error::InvalidInput(format!("empty dimension in {s:?}")));
        }
        let (base, reps) = match item.split_once('^') {
            Some((b, r)) => (
                b,
                r.parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad repeat count in {item:?}")))?,
            ),
            None => (item, 1),
        };
        let d: usize = base
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad dimension {base:?}")))?;
        dims.extend(std::iter::repeat_n(d, reps));
    }
    if dims.len() < 2 {
        return Err(Error::InvalidInput("need at least two dimensions".into()));
    }
    Ok(dims)
}

/// A synthetic problem description: dimensions, rank, optional seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub seed: Option<u64>,
}

/// Parses `d1,...,dN:R[@seed]`, with or without a `synthetic:` prefix.
pub fn parse_synthetic(s: &str) -> Result<SyntheticSpec> {
    let body = s.strip_prefix("synthetic:").unwrap_or(s);
    let (dims_s, rest) = body
        .split_once(':')
        .ok_or_else(|| Error::InvalidInput(format!("synthetic spec {s:?} needs dims:R")))?;
    let (rank_s, seed_s) = match rest.split_once('@') {
        Some((r, seed)) => (r, Some(seed)),
        None => (rest, None),
    };
    let rank: usize = rank_s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad rank {rank_s:?}")))?;
    let seed = match seed_s {
        Some(t) => Some(
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidInput(format!("bad seed {t:?}")))?,
        ),
        None => None,
    };
    Ok(SyntheticSpec {
        dims: parse_dims(dims_s)?,
        rank,
        seed,
    })
}

/// Parses a grid spec `P0xP1x...xPN`.
pub fn parse_grid(s: &str) -> Result<ProcessorGrid> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad grid factor {t:?}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() < 3 {
        return Err(Error::InvalidInput(
            "grid needs P0 and one factor per mode".into(),
        ));
    }
    ProcessorGrid::new(parts[0], parts[1..].to_vec())
}

/// Serializes a problem in the file format.
pub fn write_problem(p: &MttkrpProblem) -> String {
    let mut out = String::new();
    write!(out, "{}", p.order()).unwrap();
    for &d in p.dims() {
        write!(out, " {d}").unwrap();
    }
    writeln!(out, " {} {}", p.rank, p.mode + 1).unwrap();
    let mut col = 0;
    for v in p.tensor.values() {
        col += 1;
        let sep = if col % 8 == 0 { '\n' } else { ' ' };
        write!(out, "{v:?}{sep}").unwrap();
    }
    if col % 8 != 0 {
        out.push('\n');
    }
    for &k in &p.input_modes() {
        let f = p.factor_for_mode(k);
        for row in 0..f.rows() {
            for c in 0..f.cols() {
                write!(out, "{:?} ", f.at(row, c)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Parses the file format back into a problem.
pub fn read_problem(text: &str) -> Result<MttkrpProblem> {
    let mut tokens = text.split_whitespace();
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("missing {what}")))?
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad {what}")))
    };
    let n = next_usize("order N")?;
    if n < 2 {
        return Err(Error::InvalidInput("order must be at least 2".into()));
    }
    let mut dims = Vec::with_capacity(n);
    for k in 0..n {
        dims.push(next_usize(&format!("dimension I_{}", k + 1))?);
    }
    let rank = next_usize("rank R")?;
    let mode1 = next_usize("mode n")?;
    if mode1 == 0 || mode1 > n {
        return Err(Error::InvalidInput(format!(
            "mode {mode1} out of range 1..={n}"
        )));
    }
    let mode = mode1 - 1;

    let count: usize = dims.iter().product();
    let mut rest = text.split_whitespace().skip(n + 3);
    let mut take = |how_many: usize, what: &str| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(how_many);
        for _ in 0..how_many {
            let t = rest
                .next()
                .ok_or_else(|| Error::InvalidInput(format!("missing values for {what}")))?;
            v.push(
                t.parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad value {t:?} in {what}")))?,
            );
        }
        Ok(v)
    };
    let tensor = DenseTensor::new(dims.clone(), take(count, "tensor")?)?;
    let mut factors = Vec::new();
    for (k, &d) in dims.iter().enumerate() {
        if k == mode {
            continue;
        }
        factors.push(FactorMatrix::new(
            d,
            rank,
            take(d * rank, &format!("factor for mode {}", k + 1))?,
        )?);
    }
    if rest.next().is_some() {
        return Err(Error::InvalidInput("trailing values in problem file".into()));
    }
    MttkrpProblem::new(tensor, factors, mode, rank)
}

/// Loads a problem from a `synthetic:` spec or a file path. For synthetic
/// problems the mode comes from the caller (1-based) and `default_seed`
/// fills in a missing `@seed`; for files the header's mode wins.
pub fn load_problem(source: &str, mode1: usize, default_seed: u64) -> Result<MttkrpProblem> {
    if source.starts_with("synthetic:") {
        let spec = parse_synthetic(source)?;
        if mode1 == 0 || mode1 > spec.dims.len() {
            return Err(Error::InvalidInput(format!(
                "mode {mode1} out of range 1..={}",
                spec.dims.len()
            )));
        }
        MttkrpProblem::synthetic(
            &spec.dims,
            spec.rank,
            mode1 - 1,
            spec.seed.unwrap_or(default_seed),
        )
    } else {
        let text = std::fs::read_to_string(source)
            .map_err(|e| Error::InvalidInput(format!("cannot read {source}: {e}")))?;
        read_problem(&text)
    }
}

/// Parses a `key=value` config file; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidInput(format!("config line {}: expected key=value", lineno + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
