//! CSV and JSON artifacts, written whole so that each file's digest is taken
//! over exactly the bytes on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use physlab_core::constellation::Constellation;
use physlab_core::neural::{ActivationKind, Network};
use physlab_core::numkit::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Shortest decimal that parses back to the same f64. Very small or large
/// magnitudes use exponent form.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// 17 significant digits.
pub fn num17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        num(x)
    }
}

/// Rows of pre-formatted cells under a fixed header.
pub struct Csv {
    cols: usize,
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut text = String::new();
        text.push_str(&header.iter().map(|h| h.as_ref()).collect::<Vec<_>>().join(","));
        text.push('\n');
        Csv { cols: header.len(), text }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.cols, "row width differs from header");
        let line = cells.iter().map(|c| c.as_ref()).collect::<Vec<_>>().join(",");
        let _ = writeln!(self.text, "{line}");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// "m,x1,...,xd", one row per point.
pub fn constellation_csv(c: &Constellation) -> Csv {
    let mut header = vec!["m".to_string()];
    header.extend((1..=c.d()).map(|k| format!("x{k}")));
    let mut csv = Csv::new(&header);
    for i in 0..c.m() {
        let mut row = vec![i.to_string()];
        row.extend(c.points().row(i).iter().map(|&x| num17(x)));
        csv.row(&row);
    }
    csv
}

/// Parses a constellation CSV back into points, rows in file order.
pub fn parse_constellation_csv(text: &str) -> std::result::Result<Mat, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let d = header.split(',').count() - 1;
    let mut data = Vec::new();
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(format!("row {} has {} cells, expected {}", rows + 1, cells.len(), d + 1));
        }
        for c in &cells[1..] {
            data.push(c.parse::<f64>().map_err(|e| format!("{c}: {e}"))?);
        }
        rows += 1;
    }
    Mat::from_vec(rows, d, data).map_err(|e| e.to_string())
}

/// Serialized network weights: layer h maps widths[h] to widths[h+1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSnapshot {
    pub widths: Vec<usize>,
    pub activations: Vec<String>,
    /// weights[h][i][j], row i of the widths[h+1] × widths[h] matrix.
    pub weights: Vec<Vec<Vec<f64>>>,
}

impl WeightSnapshot {
    pub fn of(net: &Network) -> Self {
        WeightSnapshot {
            widths: net.widths().to_vec(),
            activations: net.activations().iter().map(|a| a.name().to_string()).collect(),
            weights: (0..net.depth())
                .map(|h| {
                    let w = net.weight(h);
                    (0..w.rows()).map(|i| w.row(i).to_vec()).collect()
                })
                .collect(),
        }
    }

    /// Rebuilds the network with the usual scaled output layer.
    pub fn to_network(&self) -> std::result::Result<Network, String> {
        let acts = self
            .activations
            .iter()
            .map(|a| a.parse::<ActivationKind>().map_err(|e| e.to_string()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut ws = Vec::with_capacity(self.weights.len());
        for (h, rows) in self.weights.iter().enumerate() {
            let (r, c) = (self.widths.get(h + 1).copied().unwrap_or(0), self.widths[h]);
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            if rows.len() != r || flat.len() != r * c {
                return Err(format!("layer {h} is not {r}×{c}"));
            }
            ws.push(Mat::from_vec(r, c, flat).map_err(|e| e.to_string())?);
        }
        Network::from_parts(ws, &acts, true).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory plus the digests of everything written so far.
pub struct Sink {
    dir: PathBuf,
    files: Vec<FileDigest>,
}

impl Sink {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
        Ok(Sink { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileDigest] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| HarnessError::Io { path, source })?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileDigest { name: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> Result<()> {
        self.write(name, &csv.into_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
