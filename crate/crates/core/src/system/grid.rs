use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// A parameter sample `μ = (f, d_1, …)`; the frequency maps to `s = j·2πf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    /// Frequency in Hz.
    pub frequency: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(frequency: f64) -> Self {
        Self {
            frequency,
            extra: Vec::new(),
        }
    }

    pub fn with_extra(frequency: f64, extra: Vec<f64>) -> Self {
        Self { frequency, extra }
    }

    pub fn s(&self) -> C64 {
        C64::new(0.0, 2.0 * PI * self.frequency)
    }

    /// Compact label, `f` or `f|d1|d2`.
    pub fn label(&self) -> String {
        std::iter::once(self.frequency)
            .chain(self.extra.iter().copied())
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse_label(label: &str) -> Option<Self> {
        let mut vals = label.split('|').map(|t| t.trim().parse::<f64>());
        let frequency = vals.next()?.ok()?;
        let extra = vals.collect::<std::result::Result<Vec<_>, _>>().ok()?;
        Some(Self { frequency, extra })
    }
}

/// Box of admissible parameters: a frequency band plus one interval per
/// extra parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub band: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<[f64; 2]>,
}

impl ParameterDomain {
    pub fn band(f_lo: f64, f_hi: f64) -> Self {
        Self {
            band: [f_lo, f_hi],
            extra: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.band;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!("frequency band [{lo}, {hi}] must satisfy 0 < f_lo <= f_hi")));
        }
        for (k, [a, b]) in self.extra.iter().enumerate() {
            if !(a <= b && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidSpec(format!("interval of d{} is [{a}, {b}]", k + 1)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, mu: &ParameterPoint) -> bool {
        let tol = |a: f64, b: f64| 1e-12 * a.abs().max(b.abs());
        let inside = |v: f64, [a, b]: [f64; 2]| v >= a - tol(a, b) && v <= b + tol(a, b);
        mu.extra.len() == self.extra.len()
            && mu.frequency > 0.0
            && inside(mu.frequency, self.band)
            && mu.extra.iter().zip(&self.extra).all(|(&v, &iv)| inside(v, iv))
    }

    /// Upper corner of the box.
    pub fn upper(&self) -> ParameterPoint {
        ParameterPoint::with_extra(self.band[1], self.extra.iter().map(|iv| iv[1]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    File,
}

/// An ordered, nonempty set of pairwise distinct parameter points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    points: Vec<ParameterPoint>,
    provenance: Provenance,
}

fn uniform_axis([lo, hi]: [f64; 2], count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * k as f64 / (count - 1) as f64 })
            .collect(),
    }
}

fn midpoint_axis([lo, hi]: [f64; 2], count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + (hi - lo) * (k as f64 + 0.5) / count as f64).collect()
}

impl ParameterGrid {
    pub fn new(points: Vec<ParameterPoint>, provenance: Provenance) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("parameter grid is empty".into()));
        }
        let mut keys: Vec<Vec<u64>> = points.iter().map(point_key).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("parameter grid contains duplicate points".into()));
        }
        Ok(Self { points, provenance })
    }

    /// Cartesian product of per-axis values, frequency varying slowest.
    pub fn cartesian(frequencies: &[f64], extra_axes: &[Vec<f64>]) -> Result<Self> {
        let mut points: Vec<ParameterPoint> = frequencies.iter().map(|&f| ParameterPoint::new(f)).collect();
        for axis in extra_axes {
            points = points
                .iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.extra.push(v);
                        q
                    })
                })
                .collect();
        }
        Self::new(points, Provenance::Generated)
    }

    /// `count` equispaced frequencies including both band edges; each extra
    /// parameter gets `extra_counts[k]` equispaced values (default 1: the
    /// interval midpoint).
    pub fn uniform(domain: &ParameterDomain, count: usize, extra_counts: &[usize]) -> Result<Self> {
        let axes: Vec<Vec<f64>> = domain
            .extra
            .iter()
            .enumerate()
            .map(|(k, &iv)| uniform_axis(iv, extra_counts.get(k).copied().unwrap_or(1)))
            .collect();
        Self::cartesian(&uniform_axis(domain.band, count), &axes)
    }

    /// Cell midpoints of a `count`-cell partition of every axis; disjoint
    /// from [`ParameterGrid::uniform`] with `count + 1` frequencies.
    pub fn midpoints(domain: &ParameterDomain, count: usize, extra_counts: &[usize]) -> Result<Self> {
        let axes: Vec<Vec<f64>> = domain
            .extra
            .iter()
            .enumerate()
            .map(|(k, &iv)| midpoint_axis(iv, extra_counts.get(k).copied().unwrap_or(1)))
            .collect();
        Self::cartesian(&midpoint_axis(domain.band, count), &axes)
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn get(&self, i: usize) -> &ParameterPoint {
        &self.points[i]
    }

    /// Index of the point with frequency closest to `f`.
    pub fn nearest_frequency(&self, f: f64) -> usize {
        (0..self.len())
            .min_by(|&a, &b| {
                let da = (self.points[a].frequency - f).abs();
                let db = (self.points[b].frequency - f).abs();
                da.total_cmp(&db)
            })
            .unwrap()
    }

    pub fn is_disjoint_from(&self, other: &ParameterGrid) -> bool {
        let mut keys: Vec<Vec<u64>> = other.points.iter().map(point_key).collect();
        keys.sort();
        self.points.iter().all(|p| keys.binary_search(&point_key(p)).is_err())
    }

    /// Reads a CSV file with a `frequency` column followed by one column per
    /// extra parameter.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let mut points = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::parse(path, e.to_string()))?;
            let vals = row
                .iter()
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, e.to_string()))?;
            let (&f, extra) = vals.split_first().ok_or_else(|| Error::parse(path, "empty row"))?;
            points.push(ParameterPoint::with_extra(f, extra.to_vec()));
        }
        Self::new(points, Provenance::File)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let extras = self.points[0].extra.len();
        let mut header = vec!["frequency".to_string()];
        header.extend((1..=extras).map(|k| format!("d{k}")));
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.frequency.to_string()];
            rec.extend(p.extra.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn point_key(p: &ParameterPoint) -> Vec<u64> {
    std::iter::once(p.frequency).chain(p.extra.iter().copied()).map(f64::to_bits).collect()
}

/// Declarative grid definition, as stored in manifests and run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Uniform {
        count: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra: Vec<usize>,
    },
    Midpoints {
        count: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra: Vec<usize>,
    },
    Explicit {
        points: Vec<ParameterPoint>,
    },
    File {
        path: PathBuf,
    },
}

impl GridSpec {
    /// Resolves the grid; relative file paths are taken from `base`.
    pub fn build(&self, domain: &ParameterDomain, base: Option<&Path>) -> Result<ParameterGrid> {
        let grid = match self {
            GridSpec::Uniform { count, extra } => ParameterGrid::uniform(domain, *count, extra)?,
            GridSpec::Midpoints { count, extra } => ParameterGrid::midpoints(domain, *count, extra)?,
            GridSpec::Explicit { points } => ParameterGrid::new(points.clone(), Provenance::Generated)?,
            GridSpec::File { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                ParameterGrid::read_csv(&full)?
            }
        };
        if let Some(bad) = grid.points().iter().find(|p| !domain.contains(p)) {
            return Err(Error::InvalidSpec(format!("grid point {} lies outside the parameter domain", bad.label())));
        }
        Ok(grid)
    }
}

/// Training and test grids declared alongside a system.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<GridSpec>,
}
