//! Weight-matrix storage, sign-magnitude decomposition, and sign-drift metrics.
//!
//! The on-disk SMAT format is:
//! `b"SMAT"` + version byte `0x01` + rows (u32 LE) + cols (u32 LE) +
//! rows*cols IEEE-754 binary32 LE values, row-major.
//!
//! Layer manifests are plain JSON: `{"layers": [{"name": "...", "path": "..."}]}`,
//! with paths resolved relative to the manifest's directory.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SMAT_MAGIC: &[u8; 4] = b"SMAT";
const SMAT_VERSION: u8 = 0x01;

/// Dense real matrix with a layer identity. Payload precision is binary32,
/// matching the SMAT storage format so save/load round trips bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

/// Matrix with entries in {+1, -1}, stored as i8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<i8>,
}

/// Matrix with nonnegative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f32>,
}

impl WeightMatrix {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config("matrix dimensions must be positive"));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::config(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(WeightMatrix {
            name: name.into(),
            rows,
            cols,
            data,
        })
    }

    /// Construct from f64 values, casting to the binary32 payload type.
    pub fn from_f64(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        data: &[f64],
    ) -> Result<Self> {
        Self::new(name, rows, cols, data.iter().map(|&v| v as f32).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// min(rows, cols), the effective dimension used by the probes.
    pub fn min_dim(&self) -> usize {
        self.rows.min(self.cols)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

impl SignMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<i8>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.checked_mul(cols) != Some(entries.len()) {
            return Err(Error::config("sign matrix shape mismatch"));
        }
        if entries.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::config("sign matrix entries must be +1 or -1"));
        }
        Ok(SignMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.entries[r * self.cols + c]
    }

    pub fn negated(&self) -> SignMatrix {
        SignMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&s| -s).collect(),
        }
    }

    /// View as a ±1.0 weight matrix (for spectral probes).
    pub fn to_weight(&self, name: impl Into<String>) -> WeightMatrix {
        WeightMatrix {
            name: name.into(),
            rows: self.rows,
            cols: self.cols,
            data: self.entries.iter().map(|&s| s as f32).collect(),
        }
    }
}

impl MagnitudeMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows.checked_mul(cols) != Some(entries.len()) {
            return Err(Error::config("magnitude matrix shape mismatch"));
        }
        if entries.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::config("magnitude entries must be nonnegative"));
        }
        Ok(MagnitudeMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Sign of an f32 under the convention sign(0) = +1 (and sign(-0) = +1).
#[inline]
pub fn sign_of(w: f32) -> i8 {
    if w >= 0.0 || w.is_nan() {
        1
    } else {
        -1
    }
}

/// Split W into its sign pattern S and magnitudes A so that W = S .* A.
/// Ties at zero map to +1; |-0| = 0 so recomposition is unaffected.
pub fn sign_decompose(w: &WeightMatrix) -> Result<(SignMatrix, MagnitudeMatrix)> {
    if !w.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite entry in matrix '{}'",
            w.name
        )));
    }
    let mut signs = Vec::with_capacity(w.len());
    let mut mags = Vec::with_capacity(w.len());
    for &v in &w.data {
        signs.push(sign_of(v));
        mags.push(v.abs());
    }
    Ok((
        SignMatrix {
            rows: w.rows,
            cols: w.cols,
            entries: signs,
        },
        MagnitudeMatrix {
            rows: w.rows,
            cols: w.cols,
            entries: mags,
        },
    ))
}

/// Element-wise product S .* A.
pub fn recompose(s: &SignMatrix, a: &MagnitudeMatrix) -> Result<WeightMatrix> {
    if s.rows != a.rows || s.cols != a.cols {
        return Err(Error::config("recompose: shape mismatch"));
    }
    let data = s
        .entries
        .iter()
        .zip(&a.entries)
        .map(|(&sg, &m)| f32::from(sg) * m)
        .collect();
    Ok(WeightMatrix {
        name: String::new(),
        rows: s.rows,
        cols: s.cols,
        data,
    })
}

/// Fraction of entries where the two sign matrices disagree.
pub fn flip_ratio(now: &SignMatrix, reference: &SignMatrix) -> Result<f64> {
    if now.rows != reference.rows || now.cols != reference.cols {
        return Err(Error::config("flip_ratio: shape mismatch"));
    }
    let diff = now
        .entries
        .iter()
        .zip(&reference.entries)
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / now.len() as f64)
}

/// Pooled flip ratio over several layers, weighting each layer by its entry
/// count N_l.
pub fn pooled_flip_ratio(pairs: &[(&SignMatrix, &SignMatrix)]) -> Result<f64> {
    let mut diff = 0usize;
    let mut total = 0usize;
    for (now, reference) in pairs {
        if now.rows != reference.rows || now.cols != reference.cols {
            return Err(Error::config("pooled_flip_ratio: shape mismatch"));
        }
        diff += now
            .entries
            .iter()
            .zip(&reference.entries)
            .filter(|(a, b)| a != b)
            .count();
        total += now.len();
    }
    if total == 0 {
        return Err(Error::config("pooled_flip_ratio: no entries"));
    }
    Ok(diff as f64 / total as f64)
}

pub fn save_matrix(w: &WeightMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(13 + 4 * w.len());
    buf.extend_from_slice(SMAT_MAGIC);
    buf.push(SMAT_VERSION);
    let rows = u32::try_from(w.rows)
        .map_err(|_| Error::format(path, "row count exceeds u32 range"))?;
    let cols = u32::try_from(w.cols)
        .map_err(|_| Error::format(path, "col count exceeds u32 range"))?;
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for &v in &w.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<WeightMatrix> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 13];
    file.read_exact(&mut header)
        .map_err(|_| Error::format(path, "file too short for SMAT header"))?;
    if &header[0..4] != SMAT_MAGIC {
        return Err(Error::format(path, "bad magic, expected SMAT"));
    }
    if header[4] != SMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported SMAT version {}", header[4]),
        ));
    }
    let rows = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[9..13].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(path, "dimension overflow"))?;
    let bytes = count
        .checked_mul(4)
        .ok_or_else(|| Error::format(path, "dimension overflow"))?;
    let mut payload = vec![0u8; bytes];
    file.read_exact(&mut payload)
        .map_err(|_| Error::format(path, "truncated payload"))?;
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after payload"));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    WeightMatrix::new(name, rows, cols, data)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub layers: Vec<ManifestEntry>,
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Load every layer listed in the manifest, resolving relative paths against
/// the manifest's directory.
pub fn load_layers(manifest_path: impl AsRef<Path>) -> Result<Vec<WeightMatrix>> {
    let manifest_path = manifest_path.as_ref();
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let p = PathBuf::from(&entry.path);
        let full = if p.is_absolute() { p } else { base.join(p) };
        let mut w = load_matrix(&full)?;
        w.name = entry.name.clone();
        layers.push(w);
    }
    Ok(layers)
}

/// Save matrices into `dir` as `<name>.smat` plus a `manifest.json`.
pub fn save_layers(layers: &[WeightMatrix], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest { layers: Vec::new() };
    for w in layers {
        let fname = format!("{}.smat", w.name.replace(['/', '\\'], "_"));
        save_matrix(w, dir.join(&fname))?;
        manifest.layers.push(ManifestEntry {
            name: w.name.clone(),
            path: fname,
        });
    }
    let manifest_path = dir.join("manifest.json");
    save_manifest(&manifest, &manifest_path)?;
    Ok(manifest_path)
}

/// Write raw bytes; tiny helper shared by the trace/container writers.
pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wm(rows: usize, cols: usize, data: &[f32]) -> WeightMatrix {
        WeightMatrix::new("t", rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn decompose_basic() {
        let (s, a) = sign_decompose(&wm(1, 2, &[2.0, -3.0])).unwrap();
        assert_eq!(s.entries, vec![1, -1]);
        assert_eq!(a.entries, vec![2.0, 3.0]);
    }

    #[test]
    fn decompose_zero_is_positive() {
        let (s, a) = sign_decompose(&wm(1, 1, &[0.0])).unwrap();
        assert_eq!(s.entries, vec![1]);
        assert_eq!(a.entries, vec![0.0]);
        // negative zero also maps to +1 and recomposes to a numeric zero
        let (s, a) = sign_decompose(&wm(1, 1, &[-0.0])).unwrap();
        assert_eq!(s.entries, vec![1]);
        let w = recompose(&s, &a).unwrap();
        assert_eq!(w.data[0], 0.0);
    }

    #[test]
    fn decompose_2x2() {
        let (s, a) = sign_decompose(&wm(2, 2, &[-0.5, 0.5, 1.0, -1.0])).unwrap();
        assert_eq!(s.entries, vec![-1, 1, 1, -1]);
        assert_eq!(a.entries, vec![0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn decompose_rejects_non_finite() {
        assert!(sign_decompose(&wm(1, 1, &[f32::NAN])).is_err());
        assert!(sign_decompose(&wm(1, 2, &[1.0, f32::INFINITY])).is_err());
    }

    #[test]
    fn recompose_identity_cases() {
        let s = SignMatrix::new(1, 2, vec![1, -1]).unwrap();
        let a = MagnitudeMatrix::new(1, 2, vec![2.0, 3.0]).unwrap();
        assert_eq!(recompose(&s, &a).unwrap().data, vec![2.0, -3.0]);

        let s = SignMatrix::new(1, 2, vec![1, 1]).unwrap();
        assert_eq!(recompose(&s, &a).unwrap().data, vec![2.0, 3.0]);

        let s = SignMatrix::new(1, 1, vec![-1]).unwrap();
        let a = MagnitudeMatrix::new(1, 1, vec![0.0]).unwrap();
        let w = recompose(&s, &a).unwrap();
        let (s2, _) = sign_decompose(&w).unwrap();
        assert_eq!(s2.entries, vec![1]);
    }

    #[test]
    fn recompose_shape_mismatch() {
        let s = SignMatrix::new(1, 2, vec![1, -1]).unwrap();
        let a = MagnitudeMatrix::new(2, 1, vec![2.0, 3.0]).unwrap();
        assert!(recompose(&s, &a).is_err());
    }

    #[test]
    fn flip_ratio_cases() {
        let s = SignMatrix::new(2, 2, vec![1, -1, 1, -1]).unwrap();
        assert_eq!(flip_ratio(&s, &s).unwrap(), 0.0);
        assert_eq!(flip_ratio(&s, &s.negated()).unwrap(), 1.0);
        let mut one_off = s.clone();
        one_off.entries[3] = 1;
        assert_eq!(flip_ratio(&s, &one_off).unwrap(), 0.25);
        // symmetry
        assert_eq!(
            flip_ratio(&s, &one_off).unwrap(),
            flip_ratio(&one_off, &s).unwrap()
        );
    }

    #[test]
    fn pooled_flip_weighting() {
        let a = SignMatrix::new(1, 1, vec![1]).unwrap();
        let a_ref = SignMatrix::new(1, 1, vec![-1]).unwrap();
        let b = SignMatrix::new(1, 3, vec![1, 1, 1]).unwrap();
        // 1 differing entry out of 4 total
        let pooled = pooled_flip_ratio(&[(&a, &a_ref), (&b, &b)]).unwrap();
        assert_eq!(pooled, 0.25);
    }

    #[test]
    fn smat_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.smat");
        let w = wm(2, 3, &[0.1, -0.2, 0.0, 1.5e-7, -3.0e8, 42.0]);
        save_matrix(&w, &p).unwrap();
        let r = load_matrix(&p).unwrap();
        assert_eq!(r.rows, 2);
        assert_eq!(r.cols, 3);
        for (x, y) in w.data.iter().zip(&r.data) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn smat_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.smat");
        std::fs::write(&p, b"").unwrap();
        assert!(matches!(load_matrix(&p), Err(Error::Format { .. })));

        std::fs::write(&p, b"NOPE\x01\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_matrix(&p), Err(Error::Format { .. })));

        // header says 10 rows x 1 col but payload has 5 values
        let mut buf = Vec::new();
        buf.extend_from_slice(b"SMAT");
        buf.push(0x01);
        buf.extend_from_slice(&10u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        for _ in 0..5 {
            buf.extend_from_slice(&1.0f32.to_le_bytes());
        }
        std::fs::write(&p, buf).unwrap();
        let err = load_matrix(&p).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w1 = WeightMatrix::new("fc0.weight", 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w2 = WeightMatrix::new("fc1.weight", 1, 2, vec![-1.0, 5.0]).unwrap();
        let manifest_path = save_layers(&[w1.clone(), w2.clone()], dir.path()).unwrap();
        let loaded = load_layers(&manifest_path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].name, "fc0.weight");
        assert_eq!(loaded[0].data, w1.data);
        assert_eq!(loaded[1].data, w2.data);
    }
}
