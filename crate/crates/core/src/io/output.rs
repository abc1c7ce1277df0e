use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, Side};
use crate::error::{Error, Result};
use crate::mediation::{Contrast, CurveRow, EffectKind, MediationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `json` for a `.json` extension, `csv` otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Input(format!("unknown format '{other}' (json|csv)"))),
        }
    }
}

/// Anything that can be written as a JSON document or a CSV table.
pub trait Report {
    fn write_json(&self, w: &mut dyn Write) -> io::Result<()>;
    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()>;
}

fn json<T: Serialize + ?Sized>(value: &T, w: &mut dyn Write) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn emit_report<R: Report + ?Sized>(report: &R, path: impl AsRef<Path>, format: Format) -> Result<()> {
    write_atomic(path.as_ref(), |w| match format {
        Format::Json => report.write_json(w),
        Format::Csv => report.write_csv(w),
    })
}

/// Writes through a temporary sibling file and renames it into place, so `path` either holds
/// the complete output or is left untouched.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let tmp = partial_path(path);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn partial_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

fn num(v: f64) -> String {
    // Display for f64 is the shortest string that parses back to the same value
    v.to_string()
}

/// `effect,point,sigma2,ci_low,ci_high`, one row per effect.
impl Report for MediationReport {
    fn write_json(&self, w: &mut dyn Write) -> io::Result<()> {
        json(self, w)
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["effect", "point", "sigma2", "ci_low", "ci_high"])?;
        for e in self.effects().iter() {
            out.write_record([
                e.kind.to_string(),
                num(e.point),
                num(e.sigma2),
                num(e.ci_low),
                num(e.ci_high),
            ])?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub n: usize,
    pub side: Side,
    pub alpha: f64,
    pub contrast: Contrast,
    pub rows: Vec<CurveRow>,
}

pub const CURVE_HEADER: [&str; 5] = ["d", "effect", "point", "ci_low", "ci_high"];

/// `d,effect,point,ci_low,ci_high`, three rows per dimension; failed dimensions are `NaN`.
impl Report for SensitivityReport {
    fn write_json(&self, w: &mut dyn Write) -> io::Result<()> {
        json(self, w)
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CURVE_HEADER)?;
        for row in &self.rows {
            for kind in EffectKind::ALL {
                let (point, lo, hi) = match &row.effects {
                    Some(e) => {
                        let e = e.get(kind);
                        (e.point, e.ci_low, e.ci_high)
                    }
                    None => (f64::NAN, f64::NAN, f64::NAN),
                };
                out.write_record([row.d.to_string(), kind.to_string(), num(point), num(lo), num(hi)])?;
            }
        }
        out.flush()
    }
}

/// Node positions, optionally preceded by one extra labelled column (e.g. treatment).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionTable {
    pub nodes: Vec<String>,
    pub extra: Option<(String, Vec<f64>)>,
    /// One row per node.
    pub positions: Vec<Vec<f64>>,
    pub side: Side,
    pub rotation: String,
    pub singular_values: Vec<f64>,
}

impl PositionTable {
    pub fn from_embedding(embedding: &Embedding, nodes: Vec<String>) -> Result<Self> {
        if nodes.len() != embedding.n() {
            return Err(Error::Dimension(format!(
                "{} node labels for an embedding of {} nodes",
                nodes.len(),
                embedding.n()
            )));
        }
        Ok(PositionTable {
            nodes,
            extra: None,
            positions: embedding.positions().rows().into_iter().map(|r| r.to_vec()).collect(),
            side: embedding.side(),
            rotation: if embedding.is_rotated() { "varimax" } else { "none" }.into(),
            singular_values: embedding.singular_values().to_vec(),
        })
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Array1<f64>) -> Result<Self> {
        if values.len() != self.nodes.len() {
            return Err(Error::Dimension(format!(
                "column has {} values for {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        self.extra = Some((name.into(), values.to_vec()));
        Ok(self)
    }
}

/// `node[,extra],dim1..dimd`.
impl Report for PositionTable {
    fn write_json(&self, w: &mut dyn Write) -> io::Result<()> {
        json(self, w)
    }

    fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.positions.first().map_or(0, Vec::len);
        let mut header = vec!["node".to_string()];
        if let Some((name, _)) = &self.extra {
            header.push(name.clone());
        }
        header.extend((1..=d).map(|j| format!("dim{j}")));
        out.write_record(&header)?;
        for (i, node) in self.nodes.iter().enumerate() {
            let mut rec = vec![node.clone()];
            if let Some((_, values)) = &self.extra {
                rec.push(num(values[i]));
            }
            rec.extend(self.positions[i].iter().map(|&v| num(v)));
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

/// `dim,singular_value`.
pub fn write_singular_values(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    write_atomic(path.as_ref(), |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dim", "singular_value"])?;
        for (j, v) in values.iter().enumerate() {
            out.write_record([(j + 1).to_string(), num(*v)])?;
        }
        out.flush()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mediation::{mediate, MediationOptions};
    use crate::network::AdjacencyMatrix;
    use ndarray::{array, Array2};

    fn report() -> MediationReport {
        let a = AdjacencyMatrix::new(array![
            [0.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 1.0, 1.0, 0.0]
        ])
        .unwrap();
        let w = array![[1.0, 0.0], [1.0, 1.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let y = array![0.3, 1.1, 0.2, 2.0, 1.7, 0.1];
        mediate(&a, w.view(), y.view(), 1, &MediationOptions::default(), &[]).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&r, &path, Format::Json).unwrap();
        let back: MediationReport = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["d", "side", "contrast", "nde", "nie", "total", "outcome", "mediator"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["nie"].get("sigma2").is_some());
    }

    #[test]
    fn curve_csv_rows() {
        let r = report();
        let rows = vec![
            CurveRow {
                d: 1,
                effects: Some(r.effects()),
                error: None,
            },
            CurveRow {
                d: 2,
                effects: None,
                error: Some("collinear".into()),
            },
        ];
        let rep = SensitivityReport {
            n: 6,
            side: Side::Symmetric,
            alpha: 0.05,
            contrast: Contrast::default(),
            rows,
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "d,effect,point,ci_low,ci_high");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[4].starts_with("2,nde,NaN"));
        let parsed: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, r.nie.point);
    }

    #[test]
    fn empty_curve_is_header_only() {
        let rep = SensitivityReport {
            n: 0,
            side: Side::Left,
            alpha: 0.05,
            contrast: Contrast::default(),
            rows: vec![],
        };
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "d,effect,point,ci_low,ci_high\n");
    }

    #[test]
    fn position_table_layout() {
        let a = AdjacencyMatrix::new(Array2::eye(3)).unwrap();
        let e = crate::embedding::ase(&a, 2).unwrap();
        let t = PositionTable::from_embedding(&e, vec!["a".into(), "b".into(), "c".into()])
            .unwrap()
            .with_column("treatment", array![0.0, 1.0, 0.5])
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node,treatment,dim1,dim2");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("c,0.5,"));
    }

    #[test]
    fn failed_write_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let err = write_atomic(&path, |w| {
            w.write_all(b"partial")?;
            Err(io::Error::other("boom"))
        });
        assert!(err.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        let missing = dir.path().join("no/such/dir/out.csv");
        assert!(matches!(
            emit_report(&report(), &missing, Format::Csv),
            Err(Error::Io { .. })
        ));
    }
}
