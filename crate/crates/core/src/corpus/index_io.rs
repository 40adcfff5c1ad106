//! Binary shape-space index files (`.frix`).
//!
//! ```text
//! "FRIX"  u32 version  | u32 class_count
//!                      | per class: u32 code, u32 P, u32 d, u32 n,
//!                      |            mean[P*P], basis[P*P x d], latents[n x d],
//!                      |            mask_regressor[(d+1) x P*P]
//! u64 FNV-1a checksum of the bytes between the version and the checksum
//! ```
//!
//! Integers and floats are little-endian; matrices are row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::figure::ShapeClass;
use crate::shape_space::{ShapeSpace, ShapeSpaceIndex};
use crate::structure::SkeletonPrior;

pub const MAGIC: [u8; 4] = *b"FRIX";
pub const FORMAT_VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
}

pub fn encode_index(index: &ShapeSpaceIndex) -> Vec<u8> {
    let mut payload = Vec::new();
    put_u32(&mut payload, index.spaces.len() as u32);
    for (class, space) in &index.spaces {
        put_u32(&mut payload, class.code() as u32);
        put_u32(&mut payload, space.part_size as u32);
        put_u32(&mut payload, space.dim() as u32);
        put_u32(&mut payload, space.len() as u32);
        for v in space.mean.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        put_matrix(&mut payload, &space.basis);
        put_matrix(&mut payload, &space.latents);
        put_matrix(&mut payload, &space.mask_regressor);
    }
    let mut out = Vec::with_capacity(payload.len() + 16);
    out.extend_from_slice(&MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::TruncatedFile)?;
        let s = self.bytes.get(self.pos..end).ok_or(Error::TruncatedFile)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::TruncatedFile)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let data = self.f64s(rows.checked_mul(cols).ok_or(Error::TruncatedFile)?)?;
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }
}

pub fn decode_index(bytes: &[u8]) -> Result<ShapeSpaceIndex> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile);
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < 16 {
        return Err(Error::TruncatedFile);
    }
    let payload = &bytes[8..bytes.len() - 8];
    let mut r = Reader {
        bytes: payload,
        pos: 0,
    };
    let classes = r.u32()?;
    let mut spaces = BTreeMap::new();
    for _ in 0..classes {
        let code = r.u32()?;
        let p = r.u32()? as usize;
        let d = r.u32()? as usize;
        let n = r.u32()? as usize;
        let pp = p.checked_mul(p).ok_or(Error::TruncatedFile)?;
        let mean = DVector::from_vec(r.f64s(pp)?);
        let basis = r.matrix(pp, d)?;
        let latents = r.matrix(n, d)?;
        let mask_regressor = r.matrix(d + 1, pp)?;
        let class = u8::try_from(code)
            .ok()
            .and_then(ShapeClass::from_code)
            .ok_or_else(|| {
                Error::InvalidRequest(format!("index names unknown shape class {code}"))
            })?;
        spaces.insert(
            class,
            ShapeSpace {
                class,
                part_size: p,
                mean,
                basis,
                latents,
                mask_regressor,
            },
        );
    }
    if r.pos != payload.len() {
        return Err(Error::InvalidRequest(format!(
            "{} trailing bytes after the last class",
            payload.len() - r.pos
        )));
    }
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let computed = fnv1a64(payload);
    if stored != computed {
        return Err(Error::ChecksumFailure { stored, computed });
    }
    Ok(ShapeSpaceIndex { spaces })
}

pub fn save_index(path: &Path, index: &ShapeSpaceIndex) -> Result<()> {
    fs::write(path, encode_index(index))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<ShapeSpaceIndex> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    decode_index(&fs::read(path)?)
}

/// Skeleton prior stored next to an index: `model.frix` pairs with
/// `model.prior.json`.
pub fn prior_path(index_path: &Path) -> PathBuf {
    index_path.with_extension("prior.json")
}

pub fn save_prior(path: &Path, prior: &SkeletonPrior) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(prior)?)?;
    Ok(())
}

pub fn load_prior(path: &Path) -> Result<SkeletonPrior> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::figure::{BinaryMask, PartLabel, SketchRaster};
    use crate::shape_space::{build_shape_space, BuildOptions, TrainingCrop};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_index() -> ShapeSpaceIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut crops = Vec::new();
        for label in [PartLabel::Face, PartLabel::LeftArm, PartLabel::RightArm] {
            for _ in 0..5 {
                let crop =
                    SketchRaster::from_vec(8, 8, (0..64).map(|_| rng.random::<f64>()).collect())
                        .unwrap();
                let mask = BinaryMask::threshold(&crop);
                crops.push(TrainingCrop { label, crop, mask });
            }
        }
        build_shape_space(
            &crops,
            &BuildOptions {
                dim: 3,
                ..BuildOptions::default()
            },
        )
        .unwrap()
    }

    fn assert_bit_identical(a: &ShapeSpaceIndex, b: &ShapeSpaceIndex) {
        assert_eq!(a.spaces.len(), b.spaces.len());
        for (c, s) in &a.spaces {
            let t = &b.spaces[c];
            let bits = |m: &[f64]| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(s.mean.as_slice()), bits(t.mean.as_slice()));
            assert_eq!(bits(s.basis.as_slice()), bits(t.basis.as_slice()));
            assert_eq!(bits(s.latents.as_slice()), bits(t.latents.as_slice()));
            assert_eq!(
                bits(s.mask_regressor.as_slice()),
                bits(t.mask_regressor.as_slice())
            );
            assert_eq!(s.part_size, t.part_size);
        }
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn save_load_is_bit_exact() {
        let index = small_index();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.frix");
        save_index(&path, &index).unwrap();
        let back = load_index(&path).unwrap();
        assert_bit_identical(&index, &back);
        assert_eq!(encode_index(&back), fs::read(&path).unwrap());
    }

    #[test]
    fn corrupt_files_are_named() {
        let bytes = encode_index(&small_index());

        let mut bad = bytes.clone();
        let n = bad.len();
        bad[n - 1] ^= 0xff;
        assert!(matches!(
            decode_index(&bad),
            Err(Error::ChecksumFailure { .. })
        ));

        let mut bad = bytes.clone();
        bad[100] ^= 0x01;
        assert!(matches!(
            decode_index(&bad),
            Err(Error::ChecksumFailure { .. })
        ));

        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"PNG\0");
        assert!(matches!(decode_index(&bad), Err(Error::BadMagic { found }) if &found == b"PNG\0"));

        let mut bad = bytes.clone();
        bad[4..8].copy_from_slice(&7u32.to_le_bytes());
        match decode_index(&bad) {
            Err(
                e @ Error::VersionMismatch {
                    found: 7,
                    expected: 1,
                },
            ) => {
                let msg = e.to_string();
                assert!(msg.contains('7') && msg.contains('1'));
            }
            other => panic!("{other:?}"),
        }

        for cut in [2, 6, 12, 40, bytes.len() - 9] {
            assert!(
                matches!(decode_index(&bytes[..cut]), Err(Error::TruncatedFile)),
                "cut {cut}"
            );
        }
    }

    #[test]
    fn prior_sidecar_path() {
        assert_eq!(
            prior_path(Path::new("/a/m.frix")),
            PathBuf::from("/a/m.prior.json")
        );
    }
}
