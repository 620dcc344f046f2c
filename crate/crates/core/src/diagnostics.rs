//! Trace extraction, autocorrelation and effective sample size.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::PosteriorChain;

/// Ordered values of one parameter over the retained draws.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSeries {
    pub id: String,
    pub values: Vec<f64>,
}

impl TraceSeries {
    pub fn from_chain(chain: &PosteriorChain, id: &str) -> Result<Self> {
        let values = chain
            .trace(id)
            .ok_or_else(|| Error::Dimension(format!("unknown parameter id {id:?}")))?;
        Ok(TraceSeries {
            id: id.to_string(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Linear-interpolation quantile (the usual "type 7" rule). Sorts `values`
/// in place. NaN for an empty slice.
pub fn quantile(values: &mut [f64], prob: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let h = (values.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

fn centred(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n;
    (c, c0)
}

fn autocov(c: &[f64], lag: usize) -> f64 {
    let n = c.len();
    c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
}

/// Sample autocorrelation at lags `0..=max_lag` with the biased `1/N`
/// normalization. A constant series has correlation 1 at lag 0 and 0
/// elsewhere.
pub fn acf(series: &TraceSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::Domain(format!(
            "acf needs more than {max_lag} values, series {} has {n}",
            series.id
        )));
    }
    let (c, c0) = centred(&series.values);
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let r = if c0 > 0.0 { autocov(&c, k) / c0 } else { 0.0 };
        out.push(r.clamp(-1.0, 1.0));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    /// Set when the series has no variance; `ess` is then 1.
    pub degenerate: bool,
}

/// Effective sample size from the initial monotone positive sequence of
/// paired autocorrelations.
pub fn effective_sample_size(series: &TraceSeries) -> Result<EssEstimate> {
    let n = series.len();
    if n < 4 {
        return Err(Error::Domain(format!(
            "effective sample size needs at least 4 values, series {} has {n}",
            series.id
        )));
    }
    let (c, c0) = centred(&series.values);
    if !(c0 > 0.0) {
        return Ok(EssEstimate {
            ess: 1.0,
            degenerate: true,
        });
    }
    let rho = |k: usize| autocov(&c, k) / c0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let nf = n as f64;
    let tau = (2.0 * sum - 1.0).max(1.0 / nf.log10());
    Ok(EssEstimate {
        ess: nf / tau,
        degenerate: false,
    })
}

/// Writes `iter,<id>...` rows for the given parameters. No ids gives a
/// header-only file.
pub fn export_traces(chain: &PosteriorChain, ids: &[String], path: &Path) -> Result<()> {
    if ids.is_empty() {
        return crate::io::write_atomic(path, b"iter\n");
    }
    let series: Vec<TraceSeries> = ids
        .iter()
        .map(|id| TraceSeries::from_chain(chain, id))
        .collect::<Result<_>>()?;
    let mut out = String::new();
    out.push_str("iter");
    for id in ids {
        out.push(',');
        out.push_str(&csv_field(id));
    }
    out.push('\n');
    for (s, d) in chain.draws.iter().enumerate() {
        out.push_str(&d.iter.to_string());
        for t in &series {
            out.push(',');
            out.push_str(&format!("{:?}", t.values[s]));
        }
        out.push('\n');
    }
    crate::io::write_atomic(path, out.as_bytes())
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a trace CSV back into `(iterations, series)`.
pub fn read_traces(path: &Path) -> Result<(Vec<u64>, Vec<TraceSeries>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if headers.get(0) != Some("iter") {
        return Err(Error::format(path, "first trace column must be iter"));
    }
    let mut iters = Vec::new();
    let mut series: Vec<TraceSeries> = headers
        .iter()
        .skip(1)
        .map(|h| TraceSeries {
            id: h.to_string(),
            values: Vec::new(),
        })
        .collect();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |col: usize, v: &str| Error::Cell {
            row,
            col,
            msg: format!("cannot parse {v:?}"),
        };
        let it = &rec[0];
        iters.push(it.parse().map_err(|_| bad(0, it))?);
        for (c, s) in series.iter_mut().enumerate() {
            let v = rec.get(c + 1).ok_or_else(|| bad(c + 1, ""))?;
            s.values.push(v.parse().map_err(|_| bad(c + 1, v))?);
        }
    }
    Ok((iters, series))
}
