//! Dataset, schema, chain and report files.
//!
//! Every final artifact is written to `<path>.tmp` first and renamed into
//! place, so an interrupted run never leaves a truncated file under the final
//! name.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{Draw, PosteriorChain};
use crate::model::{GroupStructure, MixedResponseDataset, ResponseLayout};

const CHAIN_FORMAT: &str = "bsmrmr-chain";
const CHAIN_VERSION: u32 = 1;

fn tmp_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".tmp");
    PathBuf::from(s)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = tmp_path(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// Sidecar describing the response blocks and predictor groups of a dataset
/// CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub group_sizes: Vec<usize>,
}

impl Schema {
    pub fn of(data: &MixedResponseDataset) -> Self {
        let lay = data.layout();
        Schema {
            l: lay.l,
            m: lay.m,
            k: lay.k,
            group_sizes: data.groups.sizes().to_vec(),
        }
    }

    pub fn p(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Expected CSV header.
    pub fn header(&self) -> Vec<String> {
        let mut h = Vec::new();
        h.extend((1..=self.p()).map(|i| format!("x{i}")));
        h.extend((1..=self.l).map(|i| format!("u{i}")));
        h.extend((1..=self.m).map(|i| format!("z{i}")));
        h.extend((1..=self.k).map(|i| format!("w{i}")));
        h
    }
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let schema: Schema = toml::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    GroupStructure::new(schema.group_sizes.clone())?;
    if schema.l + schema.m + schema.k == 0 {
        return Err(Error::Schema("l + m + k must be positive".into()));
    }
    Ok(schema)
}

pub fn write_schema(path: &Path, schema: &Schema) -> Result<()> {
    let text = toml::to_string(schema).map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

fn cell(row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Cell {
        row,
        col,
        msg: msg.into(),
    }
}

/// Reads a dataset CSV whose layout is given by the schema sidecar.
pub fn load_dataset(csv_path: &Path, schema_path: &Path) -> Result<MixedResponseDataset> {
    let schema = load_schema(schema_path)?;
    let p = schema.p();
    let width = p + schema.l + schema.m + schema.k;
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::format(csv_path, e.to_string()))?
        .clone();
    if headers.len() != width {
        return Err(Error::Schema(format!(
            "{} has {} columns but the schema describes {width} (p = {p}, l = {}, m = {}, k = {})",
            csv_path.display(),
            headers.len(),
            schema.l,
            schema.m,
            schema.k
        )));
    }
    let expected = schema.header();
    if let Some(c) = (0..width).find(|&c| headers[c] != expected[c]) {
        return Err(Error::Schema(format!(
            "{}: column {} is named {:?}, expected {:?}",
            csv_path.display(),
            c + 1,
            &headers[c],
            expected[c]
        )));
    }

    let (mut xs, mut us, mut zs, mut ws) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut n = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(csv_path, e.to_string()))?;
        if rec.len() != width {
            return Err(cell(
                row,
                rec.len().min(width),
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (c, v) in rec.iter().enumerate() {
            if c < p + schema.l {
                let x: f64 = v.parse().map_err(|_| cell(row, c, format!("not a number: {v:?}")))?;
                if c < p {
                    xs.push(x)
                } else {
                    us.push(x)
                }
            } else if c < p + schema.l + schema.m {
                let z: u64 = v
                    .parse()
                    .map_err(|_| cell(row, c, format!("count must be a non-negative integer, got {v:?}")))?;
                zs.push(z);
            } else {
                match v {
                    "0" => ws.push(0u8),
                    "1" => ws.push(1u8),
                    _ => return Err(cell(row, c, format!("binary response must be 0 or 1, got {v:?}"))),
                }
            }
        }
        n += 1;
    }
    let x = DMatrix::from_row_slice(n, p, &xs);
    let u = DMatrix::from_row_slice(n, schema.l, &us);
    let z = DMatrix::from_row_slice(n, schema.m, &zs);
    let w = DMatrix::from_row_slice(n, schema.k, &ws);
    MixedResponseDataset::new(x, u, z, w, GroupStructure::new(schema.group_sizes)?)
}

pub fn dataset_csv(data: &MixedResponseDataset) -> String {
    let schema = Schema::of(data);
    let mut out = schema.header().join(",");
    out.push('\n');
    for i in 0..data.n() {
        let mut fields: Vec<String> = Vec::with_capacity(data.p() + data.q());
        fields.extend(data.x.row(i).iter().map(|v| format!("{v:?}")));
        fields.extend(data.u.row(i).iter().map(|v| format!("{v:?}")));
        fields.extend(data.z.row(i).iter().map(|v| v.to_string()));
        fields.extend(data.w.row(i).iter().map(|v| v.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes `<stem>.csv` and its schema `<stem>.schema.toml`.
pub fn write_dataset(data: &MixedResponseDataset, csv_path: &Path, schema_path: &Path) -> Result<()> {
    write_atomic(csv_path, dataset_csv(data).as_bytes())?;
    write_schema(schema_path, &Schema::of(data))
}

/// Schema path conventionally paired with a dataset CSV.
pub fn schema_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.toml")
}

/// First line of a chain file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub format: String,
    pub version: u32,
    pub p: usize,
    pub l: usize,
    pub m: usize,
    pub k: usize,
    pub group_sizes: Vec<usize>,
    pub seed: u64,
    pub stream: u64,
    pub n_burnin: usize,
    pub n_iter: usize,
    pub n_records: usize,
    pub record_len: usize,
    pub fields: Vec<String>,
    pub truncated: bool,
    pub truncated_at: Option<usize>,
    pub acceptance: Vec<Option<f64>>,
    pub digest: String,
}

pub fn chain_bytes(chain: &PosteriorChain) -> Result<Vec<u8>> {
    let header = ChainHeader {
        format: CHAIN_FORMAT.into(),
        version: CHAIN_VERSION,
        p: chain.p,
        l: chain.layout.l,
        m: chain.layout.m,
        k: chain.layout.k,
        group_sizes: chain.group_sizes.clone(),
        seed: chain.seed,
        stream: chain.stream,
        n_burnin: chain.n_burnin,
        n_iter: chain.n_iter,
        n_records: chain.len(),
        record_len: chain.record_len(),
        fields: chain.field_names(),
        truncated: chain.truncated_at.is_some(),
        truncated_at: chain.truncated_at,
        acceptance: chain.acceptance.clone(),
        digest: chain.digest(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::Dataset(e.to_string()))?;
    out.push(b'\n');
    out.extend(chain.record_bytes());
    Ok(out)
}

pub fn write_chain(path: &Path, chain: &PosteriorChain) -> Result<()> {
    write_atomic(path, &chain_bytes(chain)?)
}

pub fn read_chain(path: &Path) -> Result<PosteriorChain> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = BufReader::new(file);
    let mut line = String::new();
    rdr.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let header: ChainHeader = serde_json::from_str(line.trim_end()).map_err(|e| Error::format(path, e.to_string()))?;
    if header.format != CHAIN_FORMAT || header.version != CHAIN_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported chain format {} v{}", header.format, header.version),
        ));
    }
    let layout = ResponseLayout {
        l: header.l,
        m: header.m,
        k: header.k,
    };
    let mut body = Vec::new();
    rdr.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    let want = header.n_records * header.record_len * 8;
    if body.len() != want {
        return Err(Error::format(
            path,
            format!("chain body has {} bytes, header implies {want}", body.len()),
        ));
    }
    let mut draws = Vec::with_capacity(header.n_records);
    let mut rec = vec![0.0; header.record_len];
    for chunk in body.chunks_exact(header.record_len * 8) {
        for (v, b) in rec.iter_mut().zip(chunk.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        draws.push(Draw::from_record(&rec, header.p, layout)?);
    }
    let chain = PosteriorChain {
        p: header.p,
        layout,
        group_sizes: header.group_sizes,
        seed: header.seed,
        stream: header.stream,
        n_burnin: header.n_burnin,
        n_iter: header.n_iter,
        draws,
        truncated_at: header.truncated_at,
        acceptance: header.acceptance,
    };
    if chain.field_names() != header.fields {
        return Err(Error::format(path, "field list does not match the dimensions"));
    }
    if chain.digest() != header.digest {
        return Err(Error::format(path, "digest mismatch"));
    }
    Ok(chain)
}

/// Every `thin`-th record as CSV, for inspection.
pub fn write_chain_csv(path: &Path, chain: &PosteriorChain, thin: usize) -> Result<()> {
    let thin = thin.max(1);
    let mut out = chain.field_names().join(",");
    out.push('\n');
    for d in chain.draws.iter().step_by(thin) {
        let rec: Vec<String> = d.to_record().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&rec.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_tmp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        assert!(!tmp_path(&p).exists());
    }

    #[test]
    fn schema_header() {
        let s = Schema {
            l: 1,
            m: 2,
            k: 1,
            group_sizes: vec![1, 2],
        };
        assert_eq!(s.header(), ["x1", "x2", "x3", "u1", "z1", "z2", "w1"]);
    }

    #[test]
    fn unknown_schema_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        fs::write(&p, "l = 1\nm = 0\nk = 0\ngroup_sizes = [1]\nextra = 2\n").unwrap();
        let err = load_schema(&p).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }
}
