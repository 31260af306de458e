//! Mesh ingestion: triangle-soup CSV, point-cloud CSV and facet-subset files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{delaunay_2p5d, Facet};
use crate::Vec3;

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    /// One facet per line: `x1,y1,z1,x2,y2,z2,x3,y3,z3`.
    Soup,
    /// One point per line: `x,y,z`, triangulated on load.
    Points,
}

impl MeshFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            MeshFormat::Soup => "soup",
            MeshFormat::Points => "points",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "soup" => Some(MeshFormat::Soup),
            "points" => Some(MeshFormat::Points),
            _ => None,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Nonblank, non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn floats(path: &Path, line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, line, e.to_string()))?;
    if v.len() != expected {
        return Err(Error::parse(
            path,
            line,
            format!("expected {expected} values, got {}", v.len()),
        ));
    }
    Ok(v)
}

pub fn parse_soup(path: &Path, text: &str) -> Result<Vec<Facet>> {
    data_lines(text)
        .map(|(n, l)| {
            let v = floats(path, n, l, 9)?;
            let p = |k: usize| Vec3::new(v[3 * k], v[3 * k + 1], v[3 * k + 2]);
            Facet::new([p(0), p(1), p(2)])
        })
        .collect()
}

pub fn parse_points(path: &Path, text: &str) -> Result<Vec<Vec3>> {
    data_lines(text)
        .map(|(n, l)| floats(path, n, l, 3).map(|v| Vec3::new(v[0], v[1], v[2])))
        .collect()
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Vec<Facet>> {
    let text = read(path)?;
    match format {
        MeshFormat::Soup => parse_soup(path, &text),
        MeshFormat::Points => delaunay_2p5d(&parse_points(path, &text)?),
    }
}

/// Zero-based facet indices, one per line.
pub fn load_facet_subset(path: &Path, facet_count: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(n, l)| {
            let i: usize = l.parse().map_err(|_| Error::parse(path, n, format!("bad index {l:?}")))?;
            if i >= facet_count {
                return Err(Error::parse(
                    path,
                    n,
                    format!("facet index {i} out of range (mesh has {facet_count})"),
                ));
            }
            Ok(i)
        })
        .collect()
}

pub fn points_csv(points: &[Vec3]) -> String {
    let mut s = String::new();
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, p.z);
    }
    s
}

pub fn soup_csv(facets: &[Facet]) -> String {
    let mut s = String::new();
    for f in facets {
        let v = &f.vertices;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            v[0].x, v[0].y, v[0].z, v[1].x, v[1].y, v[1].z, v[2].x, v[2].y, v[2].z
        );
    }
    s
}

/// Samples `40 exp(-((x-45)^2 + (y-45)^2) / 160)`-style bumps on a uniform
/// `k x k` grid over `[lo, hi]^2`.
pub fn gaussian_hill_points(
    peak: f64,
    center: (f64, f64),
    spread: f64,
    lo: f64,
    hi: f64,
    k: usize,
) -> Vec<Vec3> {
    let step = (hi - lo) / (k - 1) as f64;
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let x = lo + step * i as f64;
            let y = lo + step * j as f64;
            let z = peak * (-((x - center.0).powi(2) + (y - center.1).powi(2)) / spread).exp();
            out.push(Vec3::new(x, y, z));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_hill_has_338_facets() {
        let pts = gaussian_hill_points(40.0, (45.0, 45.0), 160.0, 25.0, 65.0, 14);
        assert_eq!(delaunay_2p5d(&pts).unwrap().len(), 338);
        // smallest uniform grid: 13x13 gives fewer facets
        let pts = gaussian_hill_points(40.0, (45.0, 45.0), 160.0, 25.0, 65.0, 13);
        assert!(delaunay_2p5d(&pts).unwrap().len() < 338);
    }

    #[test]
    fn soup_and_subset_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let soup = dir.path().join("m.csv");
        fs::write(&soup, "# comment\n0,0,0,1,0,0,0,1,0\n\n0,0,1,1,0,1,0,1,1\n").unwrap();
        let f = load_mesh(&soup, MeshFormat::Soup).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].centroid.z, 1.0);
        let sub = dir.path().join("s.txt");
        fs::write(&sub, "1\n0\n").unwrap();
        assert_eq!(load_facet_subset(&sub, 2).unwrap(), vec![1, 0]);
        fs::write(&sub, "2\n").unwrap();
        assert!(matches!(load_facet_subset(&sub, 2), Err(Error::Parse { .. })));
        let bad = dir.path().join("b.csv");
        fs::write(&bad, "0,0,0,1\n").unwrap();
        assert!(matches!(load_mesh(&bad, MeshFormat::Soup), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            load_mesh(&dir.path().join("missing.csv"), MeshFormat::Points),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_writers_round_trip() {
        let pts = gaussian_hill_points(40.0, (45.0, 45.0), 160.0, 25.0, 65.0, 4);
        let back = parse_points(Path::new("x"), &points_csv(&pts)).unwrap();
        assert_eq!(back, pts);
        let f = delaunay_2p5d(&pts).unwrap();
        assert_eq!(parse_soup(Path::new("x"), &soup_csv(&f)).unwrap(), f);
    }
}
