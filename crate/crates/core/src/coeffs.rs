//! Analysis coefficients shared by the exact and fast transforms.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples of one band's filtered signal on its vertex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BandCoefficients {
    pub vertices: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AnalysisCoefficients {
    pub bands: Vec<BandCoefficients>,
    /// Signal mean, stored as one extra measurement by the signal-adapted transform.
    pub mean: Option<f64>,
}

impl AnalysisCoefficients {
    /// Total number of stored values, the mean included.
    pub fn stored_count(&self) -> usize {
        self.bands.iter().map(|b| b.values.len()).sum::<usize>() + usize::from(self.mean.is_some())
    }

    /// CSV with header `band,vertex,value`. Bands are numbered from 1; the
    /// mean, if any, is written as band 0 with an empty vertex field.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("band,vertex,value\n");
        if let Some(mu) = self.mean {
            writeln!(s, "0,,{mu:e}").unwrap();
        }
        for (m, band) in self.bands.iter().enumerate() {
            for (v, y) in band.vertices.iter().zip(&band.values) {
                writeln!(s, "{},{v},{y:e}", m + 1).unwrap();
            }
        }
        s
    }

    /// Parses [`AnalysisCoefficients::to_csv`] output for a bank of `bands` bands.
    pub fn from_csv(text: &str, bands: usize, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut out = AnalysisCoefficients {
            bands: vec![BandCoefficients::default(); bands],
            mean: None,
        };
        for (k, raw) in text.lines().enumerate().skip(1) {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad(k + 1, "expected `band,vertex,value`"));
            }
            let band: usize = f[0].parse().map_err(|_| bad(k + 1, "bad band number"))?;
            let value: f64 = f[2].parse().map_err(|_| bad(k + 1, "bad value"))?;
            if band == 0 {
                out.mean = Some(value);
                continue;
            }
            if band > bands {
                return Err(bad(k + 1, "band number exceeds the filter bank"));
            }
            let vertex: usize = f[1].parse().map_err(|_| bad(k + 1, "bad vertex index"))?;
            out.bands[band - 1].vertices.push(vertex);
            out.bands[band - 1].values.push(value);
        }
        Ok(out)
    }
}
