//! Closed-loop traces and their CSV form.
//!
//! One header row, then one row per step `t = 0 .. T-1` and a final row
//! `t = T` that only carries the state and the value function. Columns:
//!
//! | column | content |
//! |---|---|
//! | `run`, `truth_index`, `initial_index`, `piecewise`, `oracle`, `gain` | run coordinates |
//! | `t` | step |
//! | `x_i`, `u_j` | state and applied input |
//! | `xi_i` | estimate `ξ(t)` |
//! | `rho_i`, `proj_i` | least-squares estimate and its projection (empty before data) |
//! | `xi_true_i`, `xi_tilde_i` | true parameter and `ξ̄(t) - ξ_{0|t}` |
//! | `buf_k_i` | prediction buffer after the shift |
//! | `value`, `iterations`, `solve_seconds` | controller diagnostics |
//! | `x_margin`, `u_margin`, `c_margin` | slack of `X`, `U` and `C` (negative when violated) |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub run: String,
    pub truth_index: usize,
    pub initial_index: usize,
    pub piecewise: bool,
    pub oracle: bool,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    pub rho: Option<Vec<f64>>,
    pub projected: Option<Vec<f64>>,
    pub xi_true: Vec<f64>,
    pub xi_tilde: Vec<f64>,
    pub buffer: Vec<Vec<f64>>,
    pub value: f64,
    pub iterations: usize,
    pub solve_seconds: f64,
    pub x_margin: f64,
    pub u_margin: f64,
    pub c_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub info: RunInfo,
    pub steps: Vec<TraceStep>,
    pub final_state: Vec<f64>,
    pub final_value: f64,
}

impl Trace {
    /// States `x(0) .. x(T)`.
    pub fn states(&self) -> Vec<&[f64]> {
        self.steps
            .iter()
            .map(|s| s.x.as_slice())
            .chain(std::iter::once(self.final_state.as_slice()))
            .collect()
    }

    /// Values `V(0) .. V(T)`.
    pub fn values(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.value)
            .chain(std::iter::once(self.final_value))
            .collect()
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let s = &self.steps[0];
        (s.x.len(), s.u.len(), s.xi.len(), s.buffer.len())
    }
}

fn header(n: usize, m: usize, ell: usize, buf: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "run",
        "truth_index",
        "initial_index",
        "piecewise",
        "oracle",
        "gain",
        "t",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut put = |prefix: &str, count: usize| h.extend((0..count).map(|i| format!("{prefix}_{i}")));
    put("x", n);
    put("u", m);
    put("xi", ell);
    put("rho", ell);
    put("proj", ell);
    put("xi_true", ell);
    put("xi_tilde", ell);
    for k in 0..buf {
        h.extend((0..ell).map(|i| format!("buf_{k}_{i}")));
    }
    h.extend(
        [
            "value",
            "iterations",
            "solve_seconds",
            "x_margin",
            "u_margin",
            "c_margin",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn fmts(vs: &[f64]) -> impl Iterator<Item = String> + '_ {
    vs.iter().map(|v| fmt(*v))
}

fn blanks(count: usize) -> impl Iterator<Item = String> {
    std::iter::repeat_n(String::new(), count)
}

/// Write traces sharing dimensions into one CSV stream.
pub fn write_csv<W: Write>(out: W, traces: &[Trace]) -> Result<()> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidInput("no traces to write".into()));
    };
    let (n, m, ell, buf) = first.dims();
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(header(n, m, ell, buf)).map_err(csv_err)?;
    for tr in traces {
        if tr.dims() != (n, m, ell, buf) {
            return Err(Error::InvalidInput("traces in one file must share dimensions".into()));
        }
        let info = &tr.info;
        let lead = |t: usize| {
            vec![
                info.run.clone(),
                info.truth_index.to_string(),
                info.initial_index.to_string(),
                (info.piecewise as u8).to_string(),
                (info.oracle as u8).to_string(),
                fmt(info.gain),
                t.to_string(),
            ]
        };
        for s in &tr.steps {
            let mut row = lead(s.t);
            row.extend(fmts(&s.x));
            row.extend(fmts(&s.u));
            row.extend(fmts(&s.xi));
            match &s.rho {
                Some(r) => row.extend(fmts(r)),
                None => row.extend(blanks(ell)),
            }
            match &s.projected {
                Some(r) => row.extend(fmts(r)),
                None => row.extend(blanks(ell)),
            }
            row.extend(fmts(&s.xi_true));
            row.extend(fmts(&s.xi_tilde));
            for b in &s.buffer {
                row.extend(fmts(b));
            }
            row.extend([
                fmt(s.value),
                s.iterations.to_string(),
                fmt(s.solve_seconds),
                fmt(s.x_margin),
                fmt(s.u_margin),
                fmt(s.c_margin),
            ]);
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut row = lead(tr.steps.len());
        row.extend(fmts(&tr.final_state));
        let rest = header(n, m, ell, buf).len() - row.len();
        row.extend(blanks(rest));
        let value_col = 7 + n + m + 5 * ell + buf * ell;
        row[value_col] = fmt(tr.final_value);
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, traces: &[Trace]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_csv(std::fs::File::create(path)?, traces)
}

struct Columns {
    n: usize,
    m: usize,
    ell: usize,
    buf: usize,
}

fn count_prefixed(header: &csv::StringRecord, prefix: &str) -> usize {
    header
        .iter()
        .filter(|h| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
        .count()
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as a number")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as an integer")))
}

struct Cursor<'a> {
    rec: &'a csv::StringRecord,
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> &str {
        self.rec.get(self.pos).unwrap_or("")
    }

    fn take(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let v = (self.pos..self.pos + count)
            .map(|i| parse_f64(self.rec.get(i).unwrap_or(""), what))
            .collect();
        self.pos += count;
        v
    }

    fn take_optional(&mut self, count: usize, what: &str) -> Result<Option<Vec<f64>>> {
        if self.peek().is_empty() {
            self.pos += count;
            Ok(None)
        } else {
            self.take(count, what).map(Some)
        }
    }
}

/// Read every trace from a CSV stream written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<Trace>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let cols = Columns {
        n: count_prefixed(&header, "x_"),
        m: count_prefixed(&header, "u_"),
        ell: count_prefixed(&header, "xi_"),
        buf: header
            .iter()
            .filter(|h| h.starts_with("buf_") && h.ends_with("_0"))
            .count(),
    };
    let expected = header_len(&cols);
    if header.len() != expected || cols.n == 0 || cols.ell == 0 {
        return Err(Error::Parse("trace header does not match the trace layout".into()));
    }
    let mut traces: Vec<Trace> = Vec::new();
    let mut pending: Vec<TraceStep> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let info = RunInfo {
            run: get(0).to_string(),
            truth_index: parse_usize(get(1), "truth_index")?,
            initial_index: parse_usize(get(2), "initial_index")?,
            piecewise: get(3) == "1",
            oracle: get(4) == "1",
            gain: parse_f64(get(5), "gain")?,
        };
        let t = parse_usize(get(6), "t")?;
        let mut cur = Cursor { rec: &rec, pos: 7 };
        let x = cur.take(cols.n, "x")?;
        if cur.peek().is_empty() {
            // Final row.
            let value_col = 7 + cols.n + cols.m + 5 * cols.ell + cols.buf * cols.ell;
            traces.push(Trace {
                info,
                steps: std::mem::take(&mut pending),
                final_state: x,
                final_value: parse_f64(get(value_col), "value")?,
            });
            continue;
        }
        let u = cur.take(cols.m, "u")?;
        let xi = cur.take(cols.ell, "xi")?;
        let rho = cur.take_optional(cols.ell, "rho")?;
        let projected = cur.take_optional(cols.ell, "proj")?;
        let xi_true = cur.take(cols.ell, "xi_true")?;
        let xi_tilde = cur.take(cols.ell, "xi_tilde")?;
        let buffer = (0..cols.buf)
            .map(|_| cur.take(cols.ell, "buffer"))
            .collect::<Result<_>>()?;
        let value = cur.take(1, "value")?[0];
        let iterations = parse_usize(cur.peek(), "iterations")?;
        cur.pos += 1;
        let rest = cur.take(4, "diagnostics")?;
        pending.push(TraceStep {
            t,
            x,
            u,
            xi,
            rho,
            projected,
            xi_true,
            xi_tilde,
            buffer,
            value,
            iterations,
            solve_seconds: rest[0],
            x_margin: rest[1],
            u_margin: rest[2],
            c_margin: rest[3],
        });
    }
    if !pending.is_empty() {
        return Err(Error::Parse("trace ends without a final-state row".into()));
    }
    Ok(traces)
}

fn header_len(c: &Columns) -> usize {
    header(c.n, c.m, c.ell, c.buf).len()
}

pub fn read_csv_file(path: &Path) -> Result<Vec<Trace>> {
    read_csv(std::fs::File::open(path)?).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample_trace() -> Trace {
        let step = |t: usize| TraceStep {
            t,
            x: vec![1.0 / (t as f64 + 3.0), -0.1],
            u: vec![0.25],
            xi: vec![0.5, 0.5],
            rho: (t > 0).then(|| vec![1.2, -0.2]),
            projected: (t > 0).then(|| vec![1.0, 0.0]),
            xi_true: vec![1.0, 0.0],
            xi_tilde: vec![0.5, -0.5],
            buffer: vec![vec![0.5, 0.5]; 3],
            value: 2.0 / 3.0,
            iterations: 4,
            solve_seconds: 1.5e-5,
            x_margin: 0.1,
            u_margin: 0.2,
            c_margin: -1e-12,
        };
        Trace {
            info: RunInfo {
                run: "t0_x1".into(),
                truth_index: 0,
                initial_index: 1,
                piecewise: false,
                oracle: true,
                gain: 0.05,
            },
            steps: (0..3).map(step).collect(),
            final_state: vec![1e-300, 0.0],
            final_value: 0.1,
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let mut a = sample_trace();
        let mut b = sample_trace();
        b.info.run = "t1_x0".into();
        b.steps.truncate(1);
        a.steps[1].x[0] = std::f64::consts::PI;
        let mut buf = Vec::new();
        write_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run,truth_index,initial_index,piecewise,oracle,gain,t,x_0,x_1,u_0,xi_0,xi_1,"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn truncated_trace_is_rejected() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample_trace()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 1].join("\n");
        assert!(read_csv(truncated.as_bytes()).is_err());
    }
}
