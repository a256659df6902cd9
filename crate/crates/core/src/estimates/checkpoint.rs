//! Versioned text checkpoints for [`Estimator`].
//!
//! ```text
//! ensemble-estimator 1
//! kind binary            (or `categorical <k>`, `regression`)
//! inputs <n>
//! hidden <h>
//! horizon <min> <max>    (or `horizon none`)
//! scaling <mean> <spread>      one line per input
//! params <count>
//! <value>                      one line per parameter
//! ```
//!
//! Numbers use Rust's shortest round-trip float formatting, so loading a
//! saved checkpoint reproduces the weights bit for bit.

use std::io::{BufRead, BufReader, Read, Write};

use super::network::{Estimator, EstimatorKind};
use super::spec::Horizon;
use super::EstimateError;

const MAGIC: &str = "ensemble-estimator";
const VERSION: u32 = 1;

pub fn save<W: Write>(est: &Estimator, mut out: W) -> Result<(), EstimateError> {
    writeln!(out, "{MAGIC} {VERSION}")?;
    match est.kind {
        EstimatorKind::Binary => writeln!(out, "kind binary")?,
        EstimatorKind::Categorical(k) => writeln!(out, "kind categorical {k}")?,
        EstimatorKind::Regression => writeln!(out, "kind regression")?,
    }
    writeln!(out, "inputs {}", est.inputs)?;
    writeln!(out, "hidden {}", est.hidden)?;
    match est.horizon {
        Some(h) => writeln!(out, "horizon {} {}", h.min(), h.max())?,
        None => writeln!(out, "horizon none")?,
    }
    for (m, s) in &est.scaling {
        writeln!(out, "scaling {m} {s}")?;
    }
    writeln!(out, "params {}", est.params.len())?;
    for p in &est.params {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<String, EstimateError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, what: &str) -> EstimateError {
        EstimateError::Format(format!("checkpoint line {}: {what}", self.line))
    }

    /// Reads `key v1 v2 ...` and returns the values.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>, EstimateError> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(&format!("expected `{key}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, EstimateError> {
        s.parse()
            .map_err(|_| self.err(&format!("cannot parse `{s}`")))
    }
}

pub fn load<R: Read>(input: R) -> Result<Estimator, EstimateError> {
    let mut lines = Lines {
        inner: BufReader::new(input).lines(),
        line: 0,
    };
    let version = lines.keyed(MAGIC)?;
    if version.len() != 1 || lines.parse::<u32>(&version[0])? != VERSION {
        return Err(lines.err("unsupported checkpoint version"));
    }
    let kind = lines.keyed("kind")?;
    let kind = match kind
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["binary"] => EstimatorKind::Binary,
        ["regression"] => EstimatorKind::Regression,
        ["categorical", k] => EstimatorKind::Categorical(lines.parse(k)?),
        _ => return Err(lines.err("unknown kind")),
    };
    let one = |lines: &mut Lines<R>, key: &str| -> Result<usize, EstimateError> {
        let v = lines.keyed(key)?;
        if v.len() != 1 {
            return Err(lines.err("expected one value"));
        }
        lines.parse(&v[0])
    };
    let inputs = one(&mut lines, "inputs")?;
    let hidden = one(&mut lines, "hidden")?;
    let h = lines.keyed("horizon")?;
    let horizon = match h.as_slice() {
        [none] if none == "none" => None,
        [a, b] => Some(Horizon::new(lines.parse(a)?, lines.parse(b)?)?),
        _ => return Err(lines.err("bad horizon")),
    };
    let mut scaling = Vec::with_capacity(inputs);
    for _ in 0..inputs {
        let v = lines.keyed("scaling")?;
        if v.len() != 2 {
            return Err(lines.err("scaling needs mean and spread"));
        }
        scaling.push((lines.parse(&v[0])?, lines.parse(&v[1])?));
    }
    let count = one(&mut lines, "params")?;
    let expected = hidden * inputs + hidden + kind.outputs() * hidden + kind.outputs();
    if count != expected {
        return Err(lines.err(&format!(
            "expected {expected} parameters, header says {count}"
        )));
    }
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let l = lines.next()?;
        params.push(lines.parse(l.trim())?);
    }
    Ok(Estimator {
        kind,
        inputs,
        hidden,
        scaling,
        horizon,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in [
            EstimatorKind::Binary,
            EstimatorKind::Categorical(3),
            EstimatorKind::Regression,
        ] {
            let mut est = Estimator::init(
                kind,
                4,
                5,
                vec![(0.25, 3.0), (0.0, 1.0), (-1e-7, 2.5), (0.0, 1.0)],
                17,
            );
            est.horizon = Some(Horizon::new(1, 30).unwrap());
            let mut buf = Vec::new();
            save(&est, &mut buf).unwrap();
            let back = load(buf.as_slice()).unwrap();
            assert_eq!(back, est);
            let bits = |e: &Estimator| e.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back), bits(&est));
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let est = Estimator::init(EstimatorKind::Binary, 2, 3, vec![(0.0, 1.0); 2], 1);
        let mut buf = Vec::new();
        save(&est, &mut buf).unwrap();
        buf.truncate(buf.len() - 12);
        assert!(load(buf.as_slice()).is_err());
        assert!(load("ensemble-estimator 2\n".as_bytes()).is_err());
    }
}
