//! On-disk formats: dictionary and k-space binaries, parameter-map binary
//! and text exports, label-map ingestion, plan and trace text files, and
//! PGM rasters.
//!
//! All binary formats are little-endian with an 8-byte magic and a u32
//! version. Complex arrays are interleaved (re, im) f64 pairs. Exact layouts
//! are documented in the README; round-trips are bit-exact.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::bloch::{BlochDictionary, ExcitationSequence, TissueParams};
use crate::error::{Error, Result};
use crate::phantom::{PhantomDefinition, TissueSpec};
use crate::projection::ParameterMaps;
use crate::recon::ReconTrace;
use crate::sampling::{KSpaceData, SamplingPlan, SubsampledAxis};
use crate::types::GridDims;

pub const DICT_MAGIC: &[u8; 8] = b"BLIPDICT";
pub const KSPACE_MAGIC: &[u8; 8] = b"BLIPKSPC";
pub const MAPS_MAGIC: &[u8; 8] = b"BLIPMAPS";
pub const FORMAT_VERSION: u32 = 1;

/// FNV-1a over a byte stream; used for excitation and config fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Fingerprint of an excitation sequence: FNV-1a over the little-endian
/// bytes of all flip angles followed by all repetition times.
pub fn excitation_hash(exc: &ExcitationSequence) -> u64 {
    let mut bytes = Vec::with_capacity(exc.len() * 16);
    for &a in &exc.flip_angles {
        bytes.extend_from_slice(&a.to_le_bytes());
    }
    for &tr in &exc.rep_times {
        bytes.extend_from_slice(&tr.to_le_bytes());
    }
    fnv1a(&bytes)
}

// ---------------------------------------------------------------------------
// little-endian buffer primitives

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn complexes(&mut self, vs: &[Complex64]) {
        for z in vs {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
    fn grid(&mut self, grid: GridDims) {
        match grid {
            GridDims::OneD(n) => {
                self.u8(1);
                self.u64(n as u64);
            }
            GridDims::TwoD { rows, cols } => {
                self.u8(2);
                self.u64(rows as u64);
                self.u64(cols as u64);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }
    fn bail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            what: self.what.to_string(),
            reason: reason.into(),
        })
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return self.bail(format!(
                "truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn magic(&mut self, expect: &[u8; 8]) -> Result<()> {
        let got = self.take(8)?;
        if got != expect {
            return self.bail(format!("bad magic {got:?}"));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return self.bail(format!("unsupported version {version}"));
        }
        Ok(())
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format {
            what: self.what.to_string(),
            reason: format!("value {v} does not fit usize"),
        })
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn complexes(&mut self, n: usize) -> Result<Vec<Complex64>> {
        (0..n)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }
    fn grid(&mut self) -> Result<GridDims> {
        match self.u8()? {
            1 => Ok(GridDims::OneD(self.usize()?)),
            2 => Ok(GridDims::TwoD {
                rows: self.usize()?,
                cols: self.usize()?,
            }),
            tag => self.bail(format!("unknown grid tag {tag}")),
        }
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return self.bail(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            ));
        }
        Ok(())
    }
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    v
}

// ---------------------------------------------------------------------------
// dictionary

/// Serialize a dictionary.
///
/// Layout: magic, version, P, L, the three grid axes recovered from the LUT
/// (count + values each), the excitation hash, flip angles, repetition
/// times, the atom matrix (row-major interleaved complex), the LUT triples,
/// and the stored atom norms.
pub fn dictionary_to_bytes(dict: &BlochDictionary) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(DICT_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(dict.num_atoms() as u64);
    w.u64(dict.seq_len() as u64);
    for axis in [
        sorted_unique(dict.lut().iter().map(|p| p.t1)),
        sorted_unique(dict.lut().iter().map(|p| p.t2)),
        sorted_unique(dict.lut().iter().map(|p| p.df)),
    ] {
        w.u64(axis.len() as u64);
        w.f64s(&axis);
    }
    w.u64(excitation_hash(dict.excitation()));
    w.f64s(&dict.excitation().flip_angles);
    w.f64s(&dict.excitation().rep_times);
    w.complexes(dict.atoms_flat());
    for p in dict.lut() {
        w.f64(p.t1);
        w.f64(p.t2);
        w.f64(p.df);
    }
    w.f64s(dict.atom_norms());
    w.buf
}

pub fn dictionary_from_bytes(bytes: &[u8]) -> Result<BlochDictionary> {
    let mut r = Reader::new(bytes, "dictionary file");
    r.magic(DICT_MAGIC)?;
    let p = r.usize()?;
    let l = r.usize()?;
    for _ in 0..3 {
        let n = r.usize()?;
        r.f64s(n)?; // axis values are provenance; the LUT is authoritative
    }
    let stored_hash = r.u64()?;
    let flips = r.f64s(l)?;
    let trs = r.f64s(l)?;
    let atoms = r.complexes(p * l)?;
    let lut = (0..p)
        .map(|_| {
            Ok(TissueParams {
                t1: r.f64()?,
                t2: r.f64()?,
                df: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms = r.f64s(p)?;
    r.finish()?;
    let excitation = ExcitationSequence::new(flips, trs)?;
    if excitation_hash(&excitation) != stored_hash {
        return Err(Error::Format {
            what: "dictionary file".into(),
            reason: "excitation hash does not match stored sequences".into(),
        });
    }
    BlochDictionary::from_parts(atoms, norms, lut, excitation)
}

pub fn save_dictionary(dict: &BlochDictionary, path: &Path) -> Result<()> {
    fs::write(path, dictionary_to_bytes(dict))?;
    Ok(())
}

pub fn load_dictionary(path: &Path) -> Result<BlochDictionary> {
    dictionary_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// k-space

/// Layout: magic, version, p, L, grid, axis tag, seed, shifts, then the
/// samples column-major by frame (frame t contiguous).
pub fn kspace_to_bytes(y: &KSpaceData) -> Vec<u8> {
    let plan = y.plan();
    let mut w = Writer::new();
    w.buf.extend_from_slice(KSPACE_MAGIC);
    w.u32(FORMAT_VERSION);
    w.u64(plan.p as u64);
    w.u64(plan.num_frames() as u64);
    w.grid(plan.grid);
    w.u8(match plan.axis {
        SubsampledAxis::Rows => 0,
        SubsampledAxis::Cols => 1,
    });
    w.u64(plan.seed);
    for &z in &plan.shifts {
        w.u64(z as u64);
    }
    w.complexes(y.samples());
    w.buf
}

pub fn kspace_from_bytes(bytes: &[u8]) -> Result<KSpaceData> {
    let mut r = Reader::new(bytes, "k-space file");
    r.magic(KSPACE_MAGIC)?;
    let p = r.usize()?;
    let l = r.usize()?;
    let grid = r.grid()?;
    let axis = match r.u8()? {
        0 => SubsampledAxis::Rows,
        1 => SubsampledAxis::Cols,
        tag => {
            return Err(Error::Format {
                what: "k-space file".into(),
                reason: format!("unknown axis tag {tag}"),
            })
        }
    };
    let seed = r.u64()?;
    let shifts = (0..l).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    if let Some(&bad) = shifts.iter().find(|&&z| z >= p) {
        return Err(Error::Format {
            what: "k-space file".into(),
            reason: format!("shift {bad} out of range for p={p}"),
        });
    }
    let plan = SamplingPlan {
        p,
        shifts,
        grid,
        axis,
        seed,
    };
    if grid.num_voxels() % p != 0 {
        return Err(Error::Format {
            what: "k-space file".into(),
            reason: format!("p={p} does not divide grid {grid}"),
        });
    }
    let samples = r.complexes(plan.samples_per_frame() * l)?;
    r.finish()?;
    KSpaceData::from_parts(samples, plan)
}

pub fn save_kspace(y: &KSpaceData, path: &Path) -> Result<()> {
    fs::write(path, kspace_to_bytes(y))?;
    Ok(())
}

pub fn load_kspace(path: &Path) -> Result<KSpaceData> {
    kspace_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// parameter maps

/// Layout: magic, version, grid, config hash (0 when standalone), then the
/// four flat arrays rho, t1 (ms), t2 (ms), df (Hz).
pub fn maps_to_bytes(maps: &ParameterMaps, config_hash: u64) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAPS_MAGIC);
    w.u32(FORMAT_VERSION);
    w.grid(maps.grid);
    w.u64(config_hash);
    w.f64s(&maps.rho);
    w.f64s(&maps.t1);
    w.f64s(&maps.t2);
    w.f64s(&maps.df);
    w.buf
}

pub fn maps_from_bytes(bytes: &[u8]) -> Result<(ParameterMaps, u64)> {
    let mut r = Reader::new(bytes, "parameter map file");
    r.magic(MAPS_MAGIC)?;
    let grid = r.grid()?;
    let hash = r.u64()?;
    let n = grid.num_voxels();
    let maps = ParameterMaps {
        grid,
        rho: r.f64s(n)?,
        t1: r.f64s(n)?,
        t2: r.f64s(n)?,
        df: r.f64s(n)?,
    };
    r.finish()?;
    Ok((maps, hash))
}

pub fn save_maps(maps: &ParameterMaps, config_hash: u64, path: &Path) -> Result<()> {
    fs::write(path, maps_to_bytes(maps, config_hash))?;
    Ok(())
}

pub fn load_maps(path: &Path) -> Result<(ParameterMaps, u64)> {
    maps_from_bytes(&fs::read(path)?)
}

/// Plain-text rendering of the maps for desk-scale inspection: one block
/// per parameter, one grid row per line.
pub fn maps_to_text(maps: &ParameterMaps, config_hash: u64) -> String {
    let mut s = String::new();
    s.push_str("# parameter maps\n");
    s.push_str(&format!("# grid {}\n", maps.grid));
    s.push_str(&format!("# config_hash {config_hash:016x}\n"));
    s.push_str("# units: rho relative, t1 ms, t2 ms, df Hz\n");
    let cols = match maps.grid {
        GridDims::OneD(n) => n,
        GridDims::TwoD { cols, .. } => cols,
    };
    for (name, arr) in [
        ("rho", &maps.rho),
        ("t1", &maps.t1),
        ("t2", &maps.t2),
        ("df", &maps.df),
    ] {
        s.push_str(&format!("{name}\n"));
        for row in arr.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
    }
    s
}

// ---------------------------------------------------------------------------
// phantom label maps

/// Text label-map format:
///
/// ```text
/// # phantom label map v1
/// dims <rows> <cols>        (or: dims <n>)
/// tissues <K>
/// tissue <label> <t1> <t2> <df> <rho>   (K lines)
/// labels
/// <one grid row of labels per line>
/// ```
pub fn phantom_to_text(phantom: &PhantomDefinition) -> String {
    let mut s = String::new();
    s.push_str("# phantom label map v1\n");
    match phantom.grid {
        GridDims::OneD(n) => s.push_str(&format!("dims {n}\n")),
        GridDims::TwoD { rows, cols } => s.push_str(&format!("dims {rows} {cols}\n")),
    }
    s.push_str(&format!("tissues {}\n", phantom.tissues.len()));
    for t in &phantom.tissues {
        s.push_str(&format!(
            "tissue {} {} {} {} {}\n",
            t.label, t.params.t1, t.params.t2, t.params.df, t.rho
        ));
    }
    s.push_str("labels\n");
    let cols = match phantom.grid {
        GridDims::OneD(n) => n,
        GridDims::TwoD { cols, .. } => cols,
    };
    for row in phantom.label_map.chunks(cols) {
        let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn phantom_from_text(text: &str) -> Result<PhantomDefinition> {
    let bail = |reason: String| Error::Format {
        what: "phantom label map".into(),
        reason,
    };
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let dims_line = lines.next().ok_or_else(|| bail("missing dims line".into()))?;
    let mut parts = dims_line.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(bail(format!("expected 'dims', got '{dims_line}'")));
    }
    let dims: Vec<usize> = parts
        .map(|p| p.parse().map_err(|_| bail(format!("bad dimension '{p}'"))))
        .collect::<Result<_>>()?;
    let grid = match dims.as_slice() {
        [n] => GridDims::OneD(*n),
        [rows, cols] => GridDims::TwoD {
            rows: *rows,
            cols: *cols,
        },
        _ => return Err(bail(format!("expected 1 or 2 dims, got {}", dims.len()))),
    };

    let tissues_line = lines
        .next()
        .ok_or_else(|| bail("missing tissues line".into()))?;
    let count: usize = tissues_line
        .strip_prefix("tissues ")
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| bail(format!("expected 'tissues <K>', got '{tissues_line}'")))?;

    let mut tissues = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| bail("missing tissue line".into()))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 || f[0] != "tissue" {
            return Err(bail(format!("bad tissue line '{line}'")));
        }
        let label: u32 = f[1]
            .parse()
            .map_err(|_| bail(format!("bad label '{}'", f[1])))?;
        let nums: Vec<f64> = f[2..]
            .iter()
            .map(|s| s.parse().map_err(|_| bail(format!("bad number '{s}'"))))
            .collect::<Result<_>>()?;
        tissues.push(TissueSpec {
            label,
            params: TissueParams {
                t1: nums[0],
                t2: nums[1],
                df: nums[2],
            },
            rho: nums[3],
        });
    }

    let marker = lines.next().ok_or_else(|| bail("missing labels marker".into()))?;
    if marker != "labels" {
        return Err(bail(format!("expected 'labels', got '{marker}'")));
    }
    let mut label_map = Vec::with_capacity(grid.num_voxels());
    for line in lines {
        for tok in line.split_whitespace() {
            let v: u32 = tok
                .parse()
                .map_err(|_| bail(format!("bad label value '{tok}'")))?;
            label_map.push(v);
        }
    }
    if label_map.len() != grid.num_voxels() {
        return Err(bail(format!(
            "label map has {} entries, grid {grid} needs {}",
            label_map.len(),
            grid.num_voxels()
        )));
    }
    let phantom = PhantomDefinition {
        grid,
        label_map,
        tissues,
    };
    phantom.validate()?;
    Ok(phantom)
}

pub fn save_phantom(phantom: &PhantomDefinition, path: &Path) -> Result<()> {
    fs::write(path, phantom_to_text(phantom))?;
    Ok(())
}

pub fn load_phantom(path: &Path) -> Result<PhantomDefinition> {
    phantom_from_text(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// plans, traces, rasters

/// Plain-text sampling plan for experiment reproducibility.
pub fn plan_to_text(plan: &SamplingPlan) -> String {
    let axis = match plan.axis {
        SubsampledAxis::Rows => "rows",
        SubsampledAxis::Cols => "cols",
    };
    let shifts: Vec<String> = plan.shifts.iter().map(|z| z.to_string()).collect();
    format!(
        "# sampling plan\np {}\nframes {}\ngrid {}\naxis {}\nseed {}\nshifts {}\n",
        plan.p,
        plan.num_frames(),
        plan.grid,
        axis,
        plan.seed,
        shifts.join(" ")
    )
}

/// Tab-separated iteration trace: iteration, residual, stepsize, SER.
pub fn trace_to_tsv(trace: &ReconTrace, config_hash: u64) -> String {
    let mut s = String::new();
    s.push_str(&format!("# config_hash {config_hash:016x}\n"));
    s.push_str("iteration\tresidual\tstepsize\tser_db\n");
    for r in &trace.records {
        let ser = match r.ser_db {
            Some(v) => format!("{v}"),
            None => "nan".to_string(),
        };
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.iteration, r.residual, r.stepsize, ser
        ));
    }
    s
}

/// 8-bit grayscale PGM with a fixed display window per parameter.
///
/// Windows: rho [0, 1.2], t1 [0, 5000] ms, t2 [0, 2500] ms, df [-100, 100] Hz.
pub fn map_to_pgm(values: &[f64], grid: GridDims, window: (f64, f64)) -> Result<Vec<u8>> {
    let (rows, cols) = match grid {
        GridDims::OneD(n) => (1, n),
        GridDims::TwoD { rows, cols } => (rows, cols),
    };
    if values.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "raster values vs grid",
            expected: rows * cols,
            actual: values.len(),
        });
    }
    let (lo, hi) = window;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        (t * 255.0).round() as u8
    }));
    Ok(out)
}

pub const PGM_WINDOW_RHO: (f64, f64) = (0.0, 1.2);
pub const PGM_WINDOW_T1: (f64, f64) = (0.0, 5000.0);
pub const PGM_WINDOW_T2: (f64, f64) = (0.0, 2500.0);
pub const PGM_WINDOW_DF: (f64, f64) = (-100.0, 100.0);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{random_excitation, ParameterGrid};
    use crate::phantom::{default_six_tissues, PhantomDefinition, PhantomKind};
    use crate::sampling::forward;
    use crate::types::ImageSequence;

    #[test]
    fn dictionary_round_trip_is_bit_exact() {
        let grid = ParameterGrid::new(vec![400.0, 800.0], vec![60.0, 90.0], vec![0.0, 10.0]).unwrap();
        let exc = random_excitation(12, 10.0, 10.0, 4).unwrap();
        let dict = BlochDictionary::build(&grid, &exc).unwrap();
        let bytes = dictionary_to_bytes(&dict);
        let loaded = dictionary_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.atoms_flat(), dict.atoms_flat());
        assert_eq!(loaded.atom_norms(), dict.atom_norms());
        assert_eq!(loaded.lut(), dict.lut());
        assert_eq!(loaded.excitation(), dict.excitation());
        assert_eq!(dictionary_to_bytes(&loaded), bytes);
    }

    #[test]
    fn kspace_round_trip_is_bit_exact() {
        let grid = GridDims::TwoD { rows: 8, cols: 4 };
        let plan = SamplingPlan::new(2, 6, grid, SubsampledAxis::Rows, 77).unwrap();
        let data: Vec<Complex64> = (0..grid.num_voxels() * 6)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64).cos()))
            .collect();
        let x = ImageSequence::from_data(grid, 6, data).unwrap();
        let y = forward(&x, &plan).unwrap();
        let bytes = kspace_to_bytes(&y);
        let loaded = kspace_from_bytes(&bytes).unwrap();
        assert_eq!(loaded, y);
        assert_eq!(kspace_to_bytes(&loaded), bytes);
    }

    #[test]
    fn maps_round_trip_is_bit_exact() {
        let grid = GridDims::TwoD { rows: 3, cols: 5 };
        let mut maps = ParameterMaps::zeros(grid);
        for i in 0..maps.num_voxels() {
            maps.rho[i] = i as f64 * 0.1;
            maps.t1[i] = 500.0 + i as f64;
            maps.t2[i] = 50.0 + i as f64 * 0.5;
            maps.df[i] = -3.0 + i as f64;
        }
        let bytes = maps_to_bytes(&maps, 0xdeadbeef);
        let (loaded, hash) = maps_from_bytes(&bytes).unwrap();
        assert_eq!(loaded, maps);
        assert_eq!(hash, 0xdeadbeef);
        assert_eq!(maps_to_bytes(&loaded, hash), bytes);
    }

    #[test]
    fn phantom_text_round_trip() {
        let ph = PhantomDefinition::synth(
            PhantomKind::Concentric,
            GridDims::TwoD { rows: 12, cols: 10 },
            default_six_tissues(),
            0,
        )
        .unwrap();
        let text = phantom_to_text(&ph);
        let loaded = phantom_from_text(&text).unwrap();
        assert_eq!(loaded, ph);
        assert_eq!(phantom_to_text(&loaded), text);
    }

    #[test]
    fn phantom_text_rejects_unknown_label() {
        let text = "# phantom label map v1\ndims 2\ntissues 1\ntissue 0 500 50 0 1\nlabels\n0 3\n";
        match phantom_from_text(text) {
            Err(Error::UnknownLabel { label }) => assert_eq!(label, 3),
            other => panic!("expected unknown label error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        assert!(dictionary_from_bytes(b"NOTMAGIC").is_err());
        let grid = GridDims::OneD(4);
        let maps = ParameterMaps::zeros(grid);
        let mut bytes = maps_to_bytes(&maps, 0);
        bytes.truncate(bytes.len() - 3);
        assert!(maps_from_bytes(&bytes).is_err());
        bytes = maps_to_bytes(&maps, 0);
        bytes.push(0);
        assert!(maps_from_bytes(&bytes).is_err());
    }

    #[test]
    fn pgm_has_expected_header_and_size() {
        let grid = GridDims::TwoD { rows: 2, cols: 3 };
        let pgm = map_to_pgm(&[0.0, 0.6, 1.2, 2.0, -1.0, 0.3], grid, PGM_WINDOW_RHO).unwrap();
        let header_end = pgm.iter().filter(|&&b| b == b'\n').count();
        assert!(header_end >= 3);
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(pgm.len(), b"P5\n3 2\n255\n".len() + 6);
        // clamped endpoints
        assert_eq!(pgm[pgm.len() - 6], 0);
        assert_eq!(pgm[pgm.len() - 3], 255);
    }
}
