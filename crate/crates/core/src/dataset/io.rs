//! Dataset files: little-endian, 16-byte header followed by fixed-size records.
//!
//! ```text
//! header : magic "WIID" | version u16 | record count u64 | samples per record u16
//! record : labels u16 | utilized u8 (0xFF = none) | num_interferers u8 |
//!          snr_db f32 (NaN = none) | seed u64 | 128 x (I f32, Q f32)
//! ```
//!
//! A JSON sidecar (`<file>.json`) carries the generation manifest.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::{Dataset, DatasetKind, DatasetManifest, DatasetRecord, LabelSet};
use crate::config::canonical_json;
use crate::error::{Error, FormatError, Result};
use crate::signal::{ClassId, IqSnapshot, SNAPSHOT_LEN};

pub const MAGIC: [u8; 4] = *b"WIID";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_BYTES: u64 = 16;
const COUNT_OFFSET: u64 = 6;
const META_BYTES: usize = 2 + 1 + 1 + 4 + 8;
pub const RECORD_BYTES: usize = META_BYTES + SNAPSHOT_LEN * 8;
const NO_CLASS: u8 = 0xFF;

/// Per-record metadata without the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordMeta {
    pub labels: LabelSet,
    pub utilized_class: Option<ClassId>,
    pub num_interferers: u8,
    pub snr_db: Option<f32>,
    pub seed: u64,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn encode_record(r: &DatasetRecord, buf: &mut [u8; RECORD_BYTES]) {
    buf[0..2].copy_from_slice(&r.labels.bits().to_le_bytes());
    buf[2] = r.utilized_class.map_or(NO_CLASS, u8::from);
    buf[3] = r.num_interferers;
    buf[4..8].copy_from_slice(&r.snr_db.unwrap_or(f32::NAN).to_le_bytes());
    buf[8..16].copy_from_slice(&r.seed.to_le_bytes());
    for (k, s) in r.snapshot.samples().iter().enumerate() {
        let at = META_BYTES + 8 * k;
        buf[at..at + 4].copy_from_slice(&(s.re as f32).to_le_bytes());
        buf[at + 4..at + 8].copy_from_slice(&(s.im as f32).to_le_bytes());
    }
}

fn malformed(msg: String) -> Error {
    FormatError::Malformed(msg).into()
}

fn decode_meta(buf: &[u8]) -> Result<RecordMeta> {
    let labels = LabelSet::from_bits(u16::from_le_bytes([buf[0], buf[1]])).map_err(|e| malformed(e.to_string()))?;
    let utilized_class = match buf[2] {
        NO_CLASS => None,
        c => Some(ClassId::new(c as usize).map_err(|e| malformed(e.to_string()))?),
    };
    let snr = f32::from_le_bytes(buf[4..8].try_into().unwrap());
    Ok(RecordMeta {
        labels,
        utilized_class,
        num_interferers: buf[3],
        snr_db: if snr.is_nan() { None } else { Some(snr) },
        seed: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
    })
}

fn decode_record(buf: &[u8; RECORD_BYTES]) -> Result<DatasetRecord> {
    let meta = decode_meta(buf)?;
    let samples: Vec<Complex64> = (0..SNAPSHOT_LEN)
        .map(|k| {
            let at = META_BYTES + 8 * k;
            let re = f32::from_le_bytes(buf[at..at + 4].try_into().unwrap());
            let im = f32::from_le_bytes(buf[at + 4..at + 8].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    let record = DatasetRecord {
        snapshot: IqSnapshot::new(samples).map_err(|e| malformed(e.to_string()))?,
        labels: meta.labels,
        utilized_class: meta.utilized_class,
        snr_db: meta.snr_db,
        num_interferers: meta.num_interferers,
        seed: meta.seed,
    };
    record.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(record)
}

/// Appends records to a new dataset file; the header count is written on
/// [`DatasetWriter::finish`].
pub struct DatasetWriter {
    out: BufWriter<File>,
    count: u64,
    buf: Box<[u8; RECORD_BYTES]>,
}

impl DatasetWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::with_capacity(1 << 20, File::create(path)?);
        out.write_all(&MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&0u64.to_le_bytes())?;
        out.write_all(&(SNAPSHOT_LEN as u16).to_le_bytes())?;
        Ok(DatasetWriter { out, count: 0, buf: Box::new([0; RECORD_BYTES]) })
    }

    pub fn push(&mut self, record: &DatasetRecord) -> Result<()> {
        record.validate()?;
        encode_record(record, &mut self.buf);
        self.out.write_all(&self.buf[..])?;
        self.count += 1;
        Ok(())
    }

    fn push_raw(&mut self, raw: &[u8; RECORD_BYTES]) -> Result<()> {
        self.out.write_all(raw)?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(self) -> Result<u64> {
        let mut file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(COUNT_OFFSET))?;
        file.write_all(&self.count.to_le_bytes())?;
        file.sync_all()?;
        Ok(self.count)
    }
}

/// Sequential reader; validates the header and the file length up front.
pub struct DatasetReader {
    input: BufReader<File>,
    count: u64,
    read: u64,
    buf: Box<[u8; RECORD_BYTES]>,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut input = BufReader::with_capacity(1 << 20, file);
        let mut header = [0u8; HEADER_BYTES as usize];
        if len < HEADER_BYTES {
            return Err(FormatError::Truncated(format!("{len} bytes is shorter than the {HEADER_BYTES}-byte header")).into());
        }
        input.read_exact(&mut header)?;
        let magic: [u8; 4] = header[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FormatError::BadMagic { expected: MAGIC, found: magic }.into());
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion { found: version, supported: FORMAT_VERSION }.into());
        }
        let count = u64::from_le_bytes(header[6..14].try_into().unwrap());
        let spr = u16::from_le_bytes([header[14], header[15]]);
        if spr as usize != SNAPSHOT_LEN {
            return Err(malformed(format!("{spr} samples per record, expected {SNAPSHOT_LEN}")));
        }
        let expected = count
            .checked_mul(RECORD_BYTES as u64)
            .and_then(|b| b.checked_add(HEADER_BYTES))
            .ok_or_else(|| malformed(format!("record count {count} overflows")))?;
        if len < expected {
            return Err(FormatError::Truncated(format!(
                "header declares {count} records ({expected} bytes) but file has {len} bytes"
            ))
            .into());
        }
        if len > expected {
            return Err(malformed(format!("{} trailing bytes after {count} records", len - expected)));
        }
        Ok(DatasetReader { input, count, read: 0, buf: Box::new([0; RECORD_BYTES]) })
    }

    /// Records in the file. Unlike `Iterator::count`, does not consume the reader.
    pub fn record_count(&self) -> u64 {
        self.count
    }

    fn next_raw(&mut self) -> Option<Result<&[u8; RECORD_BYTES]>> {
        if self.read == self.count {
            return None;
        }
        self.read += 1;
        Some(self.input.read_exact(&mut self.buf[..]).map(|_| &*self.buf).map_err(Error::from))
    }
}

impl Iterator for DatasetReader {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_raw().map(|raw| raw.and_then(decode_record))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.read) as usize;
        (left, Some(left))
    }
}

/// Reads record metadata only, skipping the sample payloads.
pub fn read_metadata(path: &Path) -> Result<Vec<RecordMeta>> {
    let mut reader = DatasetReader::open(path)?;
    let mut out = Vec::with_capacity(reader.count as usize);
    let mut meta = [0u8; META_BYTES];
    for _ in 0..reader.count {
        reader.input.read_exact(&mut meta)?;
        out.push(decode_meta(&meta)?);
        reader.input.seek_relative((RECORD_BYTES - META_BYTES) as i64)?;
    }
    Ok(out)
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn write_sidecar(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    fs::write(sidecar_path(path), canonical_json(manifest)? + "\n")?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<Option<DatasetManifest>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_slice(&fs::read(side)?)?))
}

/// Writes the dataset file and, when the dataset has a manifest, its sidecar.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = DatasetWriter::create(path)?;
    for r in &dataset.records {
        writer.push(r)?;
    }
    writer.finish()?;
    if let Some(m) = &dataset.manifest {
        write_sidecar(path, m)?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let records = DatasetReader::open(path)?.collect::<Result<Vec<_>>>()?;
    let dataset = Dataset { records, manifest: read_sidecar(path)? };
    dataset.validate_counts()?;
    Ok(dataset)
}

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    write_sidecar(path, manifest)
}

/// Streams a stratified train/validation split of the dataset at `input`
/// into two new files. Returns the (train, validation) record counts.
pub fn split_file(input: &Path, train_out: &Path, val_out: &Path, train_fraction: f64, seed: u64) -> Result<(u64, u64)> {
    let meta = read_metadata(input)?;
    let ns: Vec<u8> = meta.iter().map(|m| m.num_interferers).collect();
    let assign = super::partition_indices(&ns, train_fraction, seed)?;
    let parent = read_sidecar(input)?;

    let mut reader = DatasetReader::open(input)?;
    let mut train = DatasetWriter::create(train_out)?;
    let mut val = DatasetWriter::create(val_out)?;
    for &to_train in &assign {
        let raw = reader.next_raw().expect("metadata pass counted the records")?;
        if to_train { train.push_raw(raw)? } else { val.push_raw(raw)? }
    }
    let (nt, nv) = (train.finish()?, val.finish()?);
    if let Some(m) = parent {
        for (path, kind, count) in [(train_out, DatasetKind::Train, nt), (val_out, DatasetKind::Validation, nv)] {
            let config = super::GenConfig { train_fraction, ..m.config.clone() };
            write_sidecar(path, &DatasetManifest { kind, config, record_count: count })?;
        }
    }
    Ok((nt, nv))
}
