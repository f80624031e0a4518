//! Dataset text format.
//!
//! A flat `key = value` header followed by a whitespace-separated column
//! block:
//!
//! ```text
//! # quantid dataset
//! format = quantid-dataset/1
//! n = 4
//! seed = 2024
//! stream = 0
//! sigma2_true = 0.25
//! quantizer = thresholds
//! quantizer.boundary = lower-closed
//! quantizer.thresholds = -inf 1 inf
//! quantizer.levels = -1 1
//! g_true = 0.5 -0.25
//! columns = u y z_latent
//! 0.3 -1 0.12
//! ...
//! ```
//!
//! * `quantizer` is `identity` or `thresholds`. Only `thresholds` takes the
//!   three `quantizer.*` keys; `boundary` is `upper-closed` (`(q_{k-1}, q_k]`)
//!   or `lower-closed` (`[q_{k-1}, q_k)`).
//! * `g_true` is `none` when the truth is unknown.
//! * `columns` is `u y` or `u y z_latent` and must be the last header line.
//!   Row `t` holds `u_t`, `y_{t+1}` and `z_{t+1}`.
//! * `seed` and `stream` name the ChaCha8 stream the data came from. The
//!   estimators of the same run use `stream + offset`, see
//!   [`EstimatorKind::stream_offset`](crate::EstimatorKind::stream_offset).
//!
//! Reals are written in shortest round-trip form, so reading a file back
//! gives bit-identical values. Blank lines and `#` comments are allowed in
//! the header.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::Path;

use quantid_core::signal::Boundary;
use quantid_core::{Dataset, ImpulseResponse, Quantizer};

use crate::ConfigError;

pub const FORMAT_TAG: &str = "quantid-dataset/1";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn join(xs: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&fmt_f64(*x));
    }
    s
}

pub fn write_dataset<W: Write>(mut w: W, d: &Dataset) -> io::Result<()> {
    let mut h = String::new();
    // Writing to a String cannot fail.
    let _ = writeln!(h, "# quantid dataset");
    let _ = writeln!(h, "format = {FORMAT_TAG}");
    let _ = writeln!(h, "n = {}", d.n());
    let _ = writeln!(h, "seed = {}", d.seed);
    let _ = writeln!(h, "stream = {}", d.stream);
    let _ = writeln!(h, "sigma2_true = {}", fmt_f64(d.sigma2_true));
    match &d.quantizer {
        Quantizer::Identity => {
            let _ = writeln!(h, "quantizer = identity");
        }
        Quantizer::Thresholds {
            thresholds,
            levels,
            boundary,
        } => {
            let b = match boundary {
                Boundary::UpperClosed => "upper-closed",
                Boundary::LowerClosed => "lower-closed",
            };
            let _ = writeln!(h, "quantizer = thresholds");
            let _ = writeln!(h, "quantizer.boundary = {b}");
            let _ = writeln!(h, "quantizer.thresholds = {}", join(thresholds));
            let _ = writeln!(h, "quantizer.levels = {}", join(levels));
        }
    }
    match &d.g_true {
        Some(g) => {
            let _ = writeln!(h, "g_true = {}", join(g.as_slice()));
        }
        None => {
            let _ = writeln!(h, "g_true = none");
        }
    }
    let z = d.z_latent.as_deref();
    let _ = writeln!(
        h,
        "columns = u y{}",
        if z.is_some() { " z_latent" } else { "" }
    );
    w.write_all(h.as_bytes())?;
    for t in 0..d.n() {
        let mut row = format!("{} {}", fmt_f64(d.u[t]), fmt_f64(d.y[t]));
        if let Some(z) = z {
            row.push(' ');
            row.push_str(&fmt_f64(z[t]));
        }
        row.push('\n');
        w.write_all(row.as_bytes())?;
    }
    w.flush()
}

pub fn save_dataset(path: &Path, d: &Dataset) -> io::Result<()> {
    let f = std::fs::File::create(path)?;
    write_dataset(io::BufWriter::new(f), d)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, ConfigError> {
    let f = std::fs::File::open(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_dataset(io::BufReader::new(f), &path.display().to_string())
}

struct Parser<'a> {
    origin: &'a str,
    line: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            path: self.origin.to_string(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn real(&self, s: &str) -> Result<f64, ConfigError> {
        s.parse::<f64>()
            .map_err(|_| self.err(format!("`{s}` is not a number")))
    }

    fn reals(&self, s: &str) -> Result<Vec<f64>, ConfigError> {
        s.split_whitespace().map(|t| self.real(t)).collect()
    }
}

/// Parses the format above. `origin` only labels error messages.
pub fn read_dataset<R: BufRead>(r: R, origin: &str) -> Result<Dataset, ConfigError> {
    let mut p = Parser { origin, line: 0 };
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    for line in r.lines() {
        p.line += 1;
        let line = line.map_err(|e| p.err(e.to_string()))?;
        let text = line.trim();
        if columns.is_none() {
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (k, v) = text
                .split_once('=')
                .ok_or_else(|| p.err("expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "columns" {
                columns = Some(v.split_whitespace().map(str::to_owned).collect());
            } else if header
                .insert(k.to_owned(), (p.line, v.to_owned()))
                .is_some()
            {
                return Err(p.err(format!("duplicate key `{k}`")));
            }
        } else if !text.is_empty() {
            rows.push(p.reals(text)?);
        }
    }

    let mut take = |key: &str| header.remove(key);
    let mut need = |p: &mut Parser, key: &str| -> Result<String, ConfigError> {
        match take(key) {
            Some((line, v)) => {
                p.line = line;
                Ok(v)
            }
            None => Err(p.err(format!("missing key `{key}`"))),
        }
    };

    let tag = need(&mut p, "format")?;
    if tag != FORMAT_TAG {
        return Err(p.err(format!("unsupported format `{tag}`")));
    }
    let n: usize = need(&mut p, "n")?
        .parse()
        .map_err(|_| p.err("n must be a nonnegative integer"))?;
    let seed: u64 = need(&mut p, "seed")?
        .parse()
        .map_err(|_| p.err("seed must be an unsigned integer"))?;
    let stream: u64 = need(&mut p, "stream")?
        .parse()
        .map_err(|_| p.err("stream must be an unsigned integer"))?;
    let sigma2_true = {
        let v = need(&mut p, "sigma2_true")?;
        p.real(&v)?
    };
    let quantizer = match need(&mut p, "quantizer")?.as_str() {
        "identity" => Quantizer::Identity,
        "thresholds" => {
            let boundary = match need(&mut p, "quantizer.boundary")?.as_str() {
                "upper-closed" => Boundary::UpperClosed,
                "lower-closed" => Boundary::LowerClosed,
                other => return Err(p.err(format!("unknown boundary `{other}`"))),
            };
            let t = need(&mut p, "quantizer.thresholds")?;
            let thresholds = p.reals(&t)?;
            let l = need(&mut p, "quantizer.levels")?;
            let levels = p.reals(&l)?;
            Quantizer::new(thresholds, levels, boundary).map_err(|e| p.err(e.to_string()))?
        }
        other => return Err(p.err(format!("unknown quantizer `{other}`"))),
    };
    let g_true = match need(&mut p, "g_true")?.as_str() {
        "none" => None,
        v => Some(ImpulseResponse::from_slice(&p.reals(v)?)),
    };
    if let Some((k, (line, _))) = header.into_iter().next() {
        p.line = line;
        return Err(p.err(format!("unknown key `{k}`")));
    }

    let columns = columns.ok_or_else(|| p.err("missing `columns` line"))?;
    let with_z = match columns.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["u", "y"] => false,
        ["u", "y", "z_latent"] => true,
        _ => return Err(p.err(format!("unsupported columns `{}`", columns.join(" ")))),
    };
    if rows.len() != n {
        return Err(p.err(format!("header says n = {n} but found {} rows", rows.len())));
    }
    let width = columns.len();
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        return Err(p.err(format!("data row {} does not have {width} columns", i + 1)));
    }
    let dataset = Dataset {
        u: rows.iter().map(|r| r[0]).collect(),
        y: rows.iter().map(|r| r[1]).collect(),
        z_latent: with_z.then(|| rows.iter().map(|r| r[2]).collect()),
        sigma2_true,
        quantizer,
        g_true,
        seed,
        stream,
    };
    dataset.validate().map_err(|e| p.err(e.to_string()))?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_extremes() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-300,
            -2.5e300,
            f64::MIN_POSITIVE,
            5e-324,
            f64::MAX,
            f64::INFINITY,
            f64::NEG_INFINITY,
            123456.789,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }
}
