//! Serialization helpers: complex numbers as `[re, im]` JSON pairs, fixed
//! scientific formatting for CSV/COO files, and file utilities that map
//! errors to [`Error`].

use std::fmt::Write as _;
use std::path::Path;

use faer::{c64, Mat};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed CSV number format: scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Coordinate-format text of a matrix: `rows cols nnz` header followed by
/// one `row col value` line per nonzero (zero-based, column-major order).
pub fn coo_text(m: &Mat<f64>) -> String {
    let mut entries = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                entries.push((i, j, m[(i, j)]));
            }
        }
    }
    let mut s = format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{i} {j} {}", fmt_f64(v));
    }
    s
}

/// Parse the output of [`coo_text`].
pub fn parse_coo(text: &str) -> Result<Mat<f64>> {
    let bad = |what: &str| Error::Config(format!("malformed coordinate matrix: {what}"));
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("empty"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("header")))
        .collect::<Result<_>>()?;
    if header.len() != 3 {
        return Err(bad("header"));
    }
    let mut m = Mat::<f64>::zeros(header[0], header[1]);
    let mut count = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad("entry"));
        }
        let i: usize = t[0].parse().map_err(|_| bad("row"))?;
        let j: usize = t[1].parse().map_err(|_| bad("col"))?;
        let v: f64 = t[2].parse().map_err(|_| bad("value"))?;
        if i >= header[0] || j >= header[1] {
            return Err(bad("index out of range"));
        }
        m[(i, j)] = v;
        count += 1;
    }
    if count != header[2] {
        return Err(bad("entry count"));
    }
    Ok(m)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.display().to_string())
        } else {
            io_err(path, e)
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.display().to_string(), source: e })?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.display().to_string(), source: e })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// `#[serde(with = "complex")]` for a single `c64` as `[re, im]`.
pub mod complex {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &c64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<c64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(c64::new(re, im))
    }
}

/// `#[serde(with = "complex_vec")]` for `Vec<c64>`.
pub mod complex_vec {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[c64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<c64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[a, b]| c64::new(a, b)).collect())
    }
}

/// `#[serde(with = "complex_vecs")]` for `Vec<Vec<c64>>`.
pub mod complex_vecs {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<c64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<c64>>, D::Error> {
        let raw = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.into_iter().map(|[a, b]| c64::new(a, b)).collect()).collect())
    }
}

/// `#[serde(with = "complex_opt_vec")]` for `Option<Vec<c64>>`.
pub mod complex_opt_vec {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<c64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|x| x.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<c64>>, D::Error> {
        let raw = Option::<Vec<[f64; 2]>>::deserialize(d)?;
        Ok(raw.map(|x| x.into_iter().map(|[a, b]| c64::new(a, b)).collect()))
    }
}

/// `#[serde(with = "complex_opt")]` for `Option<c64>`.
pub mod complex_opt {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<c64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|z| [z.re, z.im]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<c64>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|[a, b]| c64::new(a, b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coo_round_trip_is_exact() {
        let m = Mat::from_fn(3, 2, |i, j| if i == j { 0.1 * (i + 1) as f64 } else { 0.0 } + if i == 2 { 1.0 / 3.0 } else { 0.0 });
        let back = parse_coo(&coo_text(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }
}
