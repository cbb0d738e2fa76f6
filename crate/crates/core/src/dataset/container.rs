//! `TGDS` container: magic, version, length-prefixed JSON header, fixed-layout
//! little-endian records, trailing CRC-32 of everything before it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, DatasetKind, Sample, SampleDims, Telemetry};
use crate::grasping::GraspPose;
use crate::tactile::TactileFrame;

pub const MAGIC: &[u8; 4] = b"TGDS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    kind: DatasetKind,
    dims: SampleDims,
    seed: u64,
    config_hash: u32,
    objects: Vec<String>,
    telemetry: Telemetry,
    samples: u64,
}

pub(super) fn encode_record(s: &Sample, object_index: u32, out: &mut Vec<u8>) {
    out.extend_from_slice(&object_index.to_le_bytes());
    out.extend_from_slice(&s.attempt_index.to_le_bytes());
    for v in [s.scale, s.grasp.x, s.grasp.y, s.grasp.z, s.grasp.yaw, s.left_force, s.right_force] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(s.label());
    out.extend_from_slice(&s.rgb);
    for block in [&s.depth, &s.tactile_left.data, &s.tactile_right.data] {
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn record_len(d: &SampleDims) -> usize {
    4 + 8 + 7 * 8 + 1 + 3 * d.camera_pixels() + 4 * (d.camera_pixels() + 2 * d.tactile_pixels())
}

pub fn to_bytes(ds: &Dataset) -> Result<Vec<u8>, DataError> {
    let objects = ds.object_ids();
    let index: BTreeMap<&str, u32> = objects.iter().enumerate().map(|(i, id)| (id.as_str(), i as u32)).collect();
    let header = Header {
        kind: ds.kind,
        dims: ds.dims,
        seed: ds.seed,
        config_hash: ds.config_hash,
        objects: objects.clone(),
        telemetry: ds.telemetry.clone(),
        samples: ds.len() as u64,
    };
    let json = serde_json::to_vec(&header).map_err(|e| DataError::Corrupt(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + ds.len() * record_len(&ds.dims));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &ds.samples {
        if !s.fits(&ds.dims) {
            return Err(DataError::DimsMismatch);
        }
        encode_record(s, index[s.object_id.as_str()], &mut out);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| DataError::Corrupt("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DataError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DataError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DataError> {
        Ok(self
            .take(4 * n)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Dataset, DataError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DataError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(DataError::ChecksumMismatch);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    if bytes.len() < 12 {
        return Err(DataError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(DataError::ChecksumMismatch);
    }

    let mut r = Reader { buf: body, pos: 8 };
    let hlen = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(hlen)?).map_err(|e| DataError::Corrupt(format!("header: {e}")))?;
    let d = header.dims;
    let mut samples = Vec::with_capacity(header.samples as usize);
    for _ in 0..header.samples {
        let oi = r.u32()? as usize;
        let object_id = header
            .objects
            .get(oi)
            .ok_or_else(|| DataError::Corrupt(format!("object index {oi} out of range")))?
            .clone();
        let attempt_index = r.u64()?;
        let scale = r.f64()?;
        let grasp = GraspPose {
            x: r.f64()?,
            y: r.f64()?,
            z: r.f64()?,
            yaw: r.f64()?,
        };
        let left_force = r.f64()?;
        let right_force = r.f64()?;
        let success = match r.take(1)?[0] {
            0 => false,
            1 => true,
            l => return Err(DataError::Corrupt(format!("label {l}"))),
        };
        let rgb = r.take(3 * d.camera_pixels())?.to_vec();
        let depth = r.f32s(d.camera_pixels())?;
        let frame = |data| TactileFrame {
            width: d.tactile_width,
            height: d.tactile_height,
            data,
        };
        let tactile_left = frame(r.f32s(d.tactile_pixels())?);
        let tactile_right = frame(r.f32s(d.tactile_pixels())?);
        samples.push(Sample {
            object_id,
            scale,
            attempt_index,
            grasp,
            tactile_left,
            tactile_right,
            rgb,
            depth,
            left_force,
            right_force,
            success,
        });
    }
    if r.pos != body.len() {
        return Err(DataError::Corrupt("trailing bytes after records".into()));
    }
    Ok(Dataset {
        kind: header.kind,
        dims: d,
        seed: header.seed,
        config_hash: header.config_hash,
        telemetry: header.telemetry,
        samples,
    })
}

/// Sidecar listing: `index,object_id,label,left_force,right_force`.
pub fn manifest_csv(ds: &Dataset) -> String {
    let mut s = String::from("index,object_id,label,left_force,right_force\n");
    for (i, x) in ds.samples.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{}", x.object_id, x.label(), x.left_force, x.right_force);
    }
    s
}

fn io_err(path: &Path, e: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the container and its `<path>.csv` manifest.
pub fn save(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, to_bytes(ds)?).map_err(|e| io_err(path, e))?;
    let mut side = path.as_os_str().to_owned();
    side.push(".csv");
    let side = Path::new(&side);
    std::fs::write(side, manifest_csv(ds)).map_err(|e| io_err(side, e))
}

pub fn load(path: &Path) -> Result<Dataset, DataError> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{dataset, sample};
    use super::super::ObjectTelemetry;
    use super::*;

    fn example() -> Dataset {
        let mut ds = dataset(&[("mug", 3, 2), ("box", 1, 4)]);
        ds.telemetry.per_object.insert(
            "ghost".into(),
            ObjectTelemetry { attempts: 9, recorded: 0, no_grasp: 2, no_contact: 3, invalid_tactile: 4 },
        );
        ds.samples[3].left_force = std::f64::consts::PI;
        ds.samples[1].tactile_left.data[2] = f32::MIN_POSITIVE;
        ds
    }

    #[test]
    fn round_trip_is_exact() {
        let ds = example();
        let bytes = to_bytes(&ds).unwrap();
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tgds");
        let ds = example();
        save(&ds, &p).unwrap();
        assert_eq!(load(&p).unwrap(), ds);
        let manifest = std::fs::read_to_string(dir.path().join("d.tgds.csv")).unwrap();
        assert_eq!(manifest.lines().count(), ds.len() + 1);
        assert!(manifest.starts_with("index,object_id,label,left_force,right_force\n0,mug,"));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = to_bytes(&example()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(from_bytes(&bytes), Err(DataError::BadMagic)));
        assert!(matches!(from_bytes(b"TG"), Err(DataError::BadMagic)));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = to_bytes(&example()).unwrap();
        bytes[4] = 9;
        assert!(matches!(from_bytes(&bytes), Err(DataError::UnsupportedVersion(9))));
    }

    #[test]
    fn truncation_and_corruption_fail_checksum() {
        let bytes = to_bytes(&example()).unwrap();
        for cut in [bytes.len() - 1, bytes.len() / 2, 20, 9] {
            assert!(matches!(from_bytes(&bytes[..cut]), Err(DataError::ChecksumMismatch)), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[bytes.len() / 2] ^= 1;
        assert!(matches!(from_bytes(&flipped), Err(DataError::ChecksumMismatch)));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let ds = dataset(&[]);
        assert_eq!(from_bytes(&to_bytes(&ds).unwrap()).unwrap(), ds);
    }

    #[test]
    fn mismatched_sample_rejected() {
        let mut ds = dataset(&[("a", 1, 1)]);
        let mut s = sample("a", 5, true);
        s.rgb.push(0);
        ds.samples.push(s);
        assert!(matches!(to_bytes(&ds), Err(DataError::DimsMismatch)));
    }
}
