//! Binary container formats.
//!
//! `MDT1` dataset files (little-endian): magic `MDT1`, u32 height, u32
//! width, u32 patch_size, u8 has_map, f32 noise_std, H*W f32 image values
//! row-major, then H*W f32 scalarizer values when has_map=1. Round-trips
//! are bit-exact.
//!
//! `DKL1` surrogate checkpoints: magic `DKL1`, u32 version, architecture
//! descriptor, f64 weights, f64 log-hyperparameters, target normalization
//! stats, and the acquired training set (flat indices + raw targets).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::ScanDataset;
use crate::error::{NovError, Result};
use crate::extractor::Architecture;
use crate::gp::KernelHyperparams;

const MDT_MAGIC: &[u8; 4] = b"MDT1";
const DKL_MAGIC: &[u8; 4] = b"DKL1";
const DKL_VERSION: u32 = 1;

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<_, 4>(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact::<_, 8>(r)?))
}

fn read_f32<R: Read>(r: &mut R) -> Result<f32> {
    Ok(f32::from_le_bytes(read_exact::<_, 4>(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact::<_, 8>(r)?))
}

pub fn write_dataset<W: Write>(w: &mut W, ds: &ScanDataset) -> Result<()> {
    w.write_all(MDT_MAGIC)?;
    w.write_all(&(ds.height() as u32).to_le_bytes())?;
    w.write_all(&(ds.width() as u32).to_le_bytes())?;
    w.write_all(&(ds.patch_size() as u32).to_le_bytes())?;
    w.write_all(&[u8::from(ds.has_map())])?;
    w.write_all(&ds.noise_std().to_le_bytes())?;
    for &v in ds.image() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(map) = ds.scalar_map() {
        for &v in map {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<ScanDataset> {
    let magic = read_exact::<_, 4>(r)?;
    if &magic != MDT_MAGIC {
        return Err(NovError::Format(format!("bad dataset magic {magic:?}, expected MDT1")));
    }
    let height = read_u32(r)? as usize;
    let width = read_u32(r)? as usize;
    let patch_size = read_u32(r)? as usize;
    let has_map = read_exact::<_, 1>(r)?[0];
    if has_map > 1 {
        return Err(NovError::Format(format!("has_map byte must be 0/1, got {has_map}")));
    }
    let noise_std = read_f32(r)?;
    let n = height
        .checked_mul(width)
        .ok_or_else(|| NovError::Format("dimension overflow".into()))?;
    let mut image = Vec::with_capacity(n);
    for _ in 0..n {
        image.push(read_f32(r)?);
    }
    let scalar_map = if has_map == 1 {
        let mut map = Vec::with_capacity(n);
        for _ in 0..n {
            map.push(read_f32(r)?);
        }
        Some(map)
    } else {
        None
    };
    ScanDataset::new(height, width, patch_size, noise_std, image, scalar_map)
}

pub fn save_dataset(path: &Path, ds: &ScanDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<ScanDataset> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

/// Everything needed to reconstruct a trained surrogate against a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub weights: Vec<f64>,
    pub kernel: KernelHyperparams,
    pub target_mean: f64,
    pub target_std: f64,
    pub train_indices: Vec<u32>,
    pub train_targets: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<()> {
    w.write_all(DKL_MAGIC)?;
    w.write_all(&DKL_VERSION.to_le_bytes())?;
    for dim in [ck.arch.patch_size, ck.arch.c1, ck.arch.c2, ck.arch.latent_dim] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&(ck.weights.len() as u64).to_le_bytes())?;
    for &v in &ck.weights {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [
        ck.kernel.log_outputscale,
        ck.kernel.log_lengthscale,
        ck.kernel.log_noise,
        ck.target_mean,
        ck.target_std,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(ck.train_indices.len() as u64).to_le_bytes())?;
    for &i in &ck.train_indices {
        w.write_all(&i.to_le_bytes())?;
    }
    for &y in &ck.train_targets {
        w.write_all(&y.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let magic = read_exact::<_, 4>(r)?;
    if &magic != DKL_MAGIC {
        return Err(NovError::Format(format!("bad checkpoint magic {magic:?}, expected DKL1")));
    }
    let version = read_u32(r)?;
    if version != DKL_VERSION {
        return Err(NovError::Format(format!("unsupported checkpoint version {version}")));
    }
    let arch = Architecture {
        patch_size: read_u32(r)? as usize,
        c1: read_u32(r)? as usize,
        c2: read_u32(r)? as usize,
        latent_dim: read_u32(r)? as usize,
    };
    let n_weights = read_u64(r)? as usize;
    if n_weights != arch.weight_count() {
        return Err(NovError::Format(format!(
            "checkpoint declares {n_weights} weights, architecture needs {}",
            arch.weight_count()
        )));
    }
    let mut weights = Vec::with_capacity(n_weights);
    for _ in 0..n_weights {
        weights.push(read_f64(r)?);
    }
    let kernel = KernelHyperparams {
        log_outputscale: read_f64(r)?,
        log_lengthscale: read_f64(r)?,
        log_noise: read_f64(r)?,
    };
    let target_mean = read_f64(r)?;
    let target_std = read_f64(r)?;
    let n_train = read_u64(r)? as usize;
    let mut train_indices = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        train_indices.push(read_u32(r)?);
    }
    let mut train_targets = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        train_targets.push(read_f64(r)?);
    }
    Ok(Checkpoint { arch, weights, kernel, target_mean, target_std, train_indices, train_targets })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, ck)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn roundtrip_dataset(ds: &ScanDataset) -> ScanDataset {
        let mut buf = Vec::new();
        write_dataset(&mut buf, ds).unwrap();
        read_dataset(&mut buf.as_slice()).unwrap()
    }

    #[test]
    fn dataset_roundtrip_is_bit_exact() {
        let image: Vec<f32> = (0..48).map(|i| (i as f32) * 0.37 - 3.0).collect();
        let map: Vec<f32> = (0..48).map(|i| (i as f32).sin()).collect();
        let ds = ScanDataset::new(6, 8, 3, 0.25, image, Some(map)).unwrap();
        assert_eq!(roundtrip_dataset(&ds), ds);

        let no_map = ScanDataset::new(6, 8, 3, 0.0, vec![1.5; 48], None).unwrap();
        assert_eq!(roundtrip_dataset(&no_map), no_map);
    }

    #[test]
    fn bad_magic_and_bad_has_map_are_format_errors() {
        let ds = ScanDataset::new(4, 4, 2, 0.0, vec![0.0; 16], None).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();

        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(read_dataset(&mut wrong_magic.as_slice()), Err(NovError::Format(_))));

        let mut wrong_flag = buf.clone();
        wrong_flag[16] = 2;
        assert!(matches!(read_dataset(&mut wrong_flag.as_slice()), Err(NovError::Format(_))));

        assert!(read_dataset(&mut buf[..20].as_ref()).is_err());
    }

    fn sample_checkpoint() -> Checkpoint {
        let arch = Architecture::new(8, 2, 3, 2).unwrap();
        let weights: Vec<f64> = (0..arch.weight_count()).map(|i| (i as f64) * 0.01 - 1.0).collect();
        Checkpoint {
            arch,
            weights,
            kernel: KernelHyperparams {
                log_outputscale: 0.3,
                log_lengthscale: -0.2,
                log_noise: -2.5,
            },
            target_mean: 1.25,
            target_std: 0.75,
            train_indices: vec![3, 1, 4, 1 + 40],
            train_targets: vec![0.5, -0.25, 1.0, 2.0],
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let ck = sample_checkpoint();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), ck);
    }

    #[test]
    fn checkpoint_weight_count_is_validated() {
        let mut ck = sample_checkpoint();
        ck.weights.pop();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(NovError::Format(_))));
    }

    proptest! {
        #[test]
        fn dataset_roundtrip_fuzzed(
            height in 1usize..12,
            width in 1usize..12,
            with_map in any::<bool>(),
            noise in 0.0f32..2.0,
            seed in any::<u64>(),
        ) {
            let patch_size = 1 + (seed as usize) % height.min(width);
            let n = height * width;
            // Deterministic pseudo-random finite payload from the seed.
            let mut x = seed | 1;
            let mut next = || {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 33) as f32) / 1e6 - 4000.0
            };
            let image: Vec<f32> = (0..n).map(|_| next()).collect();
            let map = with_map.then(|| (0..n).map(|_| next()).collect::<Vec<f32>>());
            let ds = ScanDataset::new(height, width, patch_size, noise, image, map).unwrap();
            prop_assert_eq!(roundtrip_dataset(&ds), ds);
        }
    }
}
