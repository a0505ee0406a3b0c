//! Plain-text formats.
//!
//! * graph: first line `n`, then one `i j` line per edge (0-based, `i < j`)
//! * database: CSV without header, one row per node
//! * permutation: one line of space-separated images
//! * instance directory: `db1.csv`, `db2.csv`, optional `graph1.txt` /
//!   `graph2.txt`, and `manifest.json` with parameters, seed and ground truth

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::models::{CorrelatedInstance, ModelParams};
use crate::rng::Seed;
use crate::types::{AttributeDatabase, LabelVector, Permutation};

pub const GRAPH1_FILE: &str = "graph1.txt";
pub const GRAPH2_FILE: &str = "graph2.txt";
pub const DB1_FILE: &str = "db1.csv";
pub const DB2_FILE: &str = "db2.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

pub fn write_graph<W: Write>(g: &SimpleGraph, mut w: W) -> Result<()> {
    writeln!(w, "{}", g.n())?;
    for (u, v) in g.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn read_graph<R: Read>(r: R) -> Result<SimpleGraph> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let n = loop {
        match lines.next() {
            Some((no, line)) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() {
                    continue;
                }
                break t.parse::<usize>().map_err(|e| parse_err(no + 1, e))?;
            }
            None => return Err(Error::Parse("missing node-count header".into())),
        }
    };
    let mut edges = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let mut it = line.split_whitespace();
        let (Some(a), Some(b)) = (it.next(), it.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(parse_err(no + 1, "expected `i j`"));
        };
        if it.next().is_some() {
            return Err(parse_err(no + 1, "trailing tokens"));
        }
        let u = a.parse::<usize>().map_err(|e| parse_err(no + 1, e))?;
        let v = b.parse::<usize>().map_err(|e| parse_err(no + 1, e))?;
        edges.push((u, v));
    }
    SimpleGraph::from_edges(n, edges)
}

pub fn write_database<W: Write>(db: &AttributeDatabase, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in db.rows() {
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a headerless CSV. An empty input is a database with no rows.
pub fn read_database<R: Read>(r: R) -> Result<AttributeDatabase> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut rows = Vec::new();
    for (no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .filter(|f| !f.trim().is_empty())
            .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(no + 1, e)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    AttributeDatabase::from_rows(&rows)
}

pub fn write_permutation<W: Write>(pi: &Permutation, mut w: W) -> Result<()> {
    let line = pi
        .as_slice()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(w, "{line}")?;
    Ok(())
}

pub fn read_permutation<R: Read>(mut r: R) -> Result<Permutation> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    let mapping = s
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Permutation::new(mapping)
}

/// Ground truth recorded next to a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub perm: Permutation,
    pub labels1: LabelVector,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub params: ModelParams,
    pub seed: Seed,
    pub truth: GroundTruth,
}

/// The observable part of an instance, plus its ground truth when known.
#[derive(Debug, Clone)]
pub struct InstanceFiles {
    pub graph1: Option<SimpleGraph>,
    pub graph2: Option<SimpleGraph>,
    pub db1: AttributeDatabase,
    pub db2: AttributeDatabase,
    pub manifest: Option<Manifest>,
}

impl InstanceFiles {
    pub fn into_instance(self) -> Result<CorrelatedInstance> {
        let m = self
            .manifest
            .ok_or_else(|| Error::InvalidArgument("instance has no manifest".into()))?;
        Ok(CorrelatedInstance {
            graph1: self.graph1,
            graph2: self.graph2,
            db1: self.db1,
            db2: self.db2,
            truth_perm: m.truth.perm,
            labels1: m.truth.labels1,
            mu: m.truth.mu,
            params: m.params,
            seed: m.seed,
        })
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

pub fn write_instance(inst: &CorrelatedInstance, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(g) = &inst.graph1 {
        write_graph(g, create(&dir.join(GRAPH1_FILE))?)?;
    }
    if let Some(g) = &inst.graph2 {
        write_graph(g, create(&dir.join(GRAPH2_FILE))?)?;
    }
    write_database(&inst.db1, create(&dir.join(DB1_FILE))?)?;
    write_database(&inst.db2, create(&dir.join(DB2_FILE))?)?;
    let manifest = Manifest {
        params: inst.params.clone(),
        seed: inst.seed,
        truth: GroundTruth {
            perm: inst.truth_perm.clone(),
            labels1: inst.labels1.clone(),
            mu: inst.mu.clone(),
        },
    };
    let mut w = create(&dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

pub fn read_instance_files(dir: &Path) -> Result<InstanceFiles> {
    let open = |name: &str| -> Result<Option<fs::File>> {
        let p = dir.join(name);
        if p.exists() {
            Ok(Some(fs::File::open(p)?))
        } else {
            Ok(None)
        }
    };
    let required = |name: &str| -> Result<fs::File> {
        open(name)?.ok_or_else(|| {
            Error::InvalidArgument(format!("{} missing from {}", name, dir.display()))
        })
    };
    let graph1 = open(GRAPH1_FILE)?.map(read_graph).transpose()?;
    let graph2 = open(GRAPH2_FILE)?.map(read_graph).transpose()?;
    let db1 = read_database(required(DB1_FILE)?)?;
    let db2 = read_database(required(DB2_FILE)?)?;
    let manifest = open(MANIFEST_FILE)?
        .map(|f| serde_json::from_reader::<_, Manifest>(BufReader::new(f)))
        .transpose()?;
    Ok(InstanceFiles {
        graph1,
        graph2,
        db1,
        db2,
        manifest,
    })
}

pub fn read_instance(dir: &Path) -> Result<CorrelatedInstance> {
    read_instance_files(dir)?.into_instance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_ccsbm, CcsbmParams};

    #[test]
    fn graph_roundtrip() {
        let g = SimpleGraph::from_edges(5, [(0, 1), (3, 1), (2, 4)]).unwrap();
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "5\n0 1\n1 3\n2 4\n");
        assert_eq!(read_graph(&buf[..]).unwrap(), g);
    }

    #[test]
    fn graph_rejects_garbage() {
        assert!(read_graph("".as_bytes()).is_err());
        assert!(read_graph("3\n0 x\n".as_bytes()).is_err());
        assert!(read_graph("3\n0 3\n".as_bytes()).is_err());
        assert!(read_graph("3\n1 1\n".as_bytes()).is_err());
    }

    #[test]
    fn database_roundtrip_is_exact() {
        let db = AttributeDatabase::from_rows(&[vec![0.1, -2.5e-300], vec![1.0 / 3.0, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_database(&db, &mut buf).unwrap();
        assert_eq!(read_database(&buf[..]).unwrap(), db);
    }

    #[test]
    fn permutation_roundtrip() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let mut buf = Vec::new();
        write_permutation(&p, &mut buf).unwrap();
        assert_eq!(buf, b"2 0 1\n");
        assert_eq!(read_permutation(&buf[..]).unwrap(), p);
        assert!(read_permutation("0 0".as_bytes()).is_err());
    }

    #[test]
    fn instance_directory_roundtrip() {
        let params = CcsbmParams {
            n: 60,
            p: 0.2,
            q: 0.05,
            s: 0.8,
            r: 3.0,
            d: 2,
            rho: 0.7,
            allow_equal_pq: false,
        };
        let inst = sample_ccsbm(&params, Seed::new(1, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_instance(&inst, dir.path()).unwrap();
        let back = read_instance(dir.path()).unwrap();
        assert_eq!(back.graph1, inst.graph1);
        assert_eq!(back.graph2, inst.graph2);
        assert_eq!(back.db1, inst.db1);
        assert_eq!(back.db2, inst.db2);
        assert_eq!(back.truth_perm, inst.truth_perm);
        assert_eq!(back.labels1, inst.labels1);
        assert_eq!(back.mu, inst.mu);
        assert_eq!(back.params, inst.params);
        assert_eq!(back.seed, inst.seed);
    }
}
