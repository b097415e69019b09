//! Binary snapshots of a [`VectorField3`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! "LNSF" | u32 version (=1) | u32 n | f64 box_len | x[n³] | y[n³] | z[n³]
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Grid, GridError, VectorField3};

pub const MAGIC: [u8; 4] = *b"LNSF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("snapshot has {0} trailing bytes")]
    Trailing(usize),
    #[error("invalid grid in header: {0}")]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(field: &VectorField3) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * 8 * g.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.box_len().to_le_bytes());
    for c in field.components() {
        for v in c {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<VectorField3, SnapshotError> {
    if bytes.len() < 4 {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let box_len = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let grid = Grid::new(n, box_len)?;
    let expected = HEADER_LEN + 3 * 8 * grid.len();
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(SnapshotError::Trailing(bytes.len() - expected));
    }
    let payload = &bytes[HEADER_LEN..];
    let comp_bytes = 8 * grid.len();
    let comps = [0, 1, 2].map(|c| {
        payload[c * comp_bytes..(c + 1) * comp_bytes]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect::<Vec<_>>()
    });
    Ok(VectorField3::from_components(grid, comps)?)
}

pub fn write(field: &VectorField3, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&encode(field))?;
    file.flush()?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<VectorField3, SnapshotError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(seed: u64) -> VectorField3 {
        let g = Grid::new(8, 2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = [0, 1, 2].map(|_| (0..g.len()).map(|_| rng.gen_range(-1e3..1e3)).collect());
        VectorField3::from_components(g, comps).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&random_field(1));
        assert_eq!(&bytes[..4], b"LNSF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2.5);
        assert_eq!(bytes.len(), 20 + 3 * 8 * 512);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.lnsf");
        let f = random_field(7);
        write(&f, &path).unwrap();
        let back = read(&path).unwrap();
        for c in 0..3 {
            let a: Vec<u64> = f.component(c).iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.component(c).iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(&random_field(2));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(SnapshotError::BadMagic(_))));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = encode(&random_field(2));
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(SnapshotError::Version(2))));
    }

    #[test]
    fn truncated_mid_component() {
        let bytes = encode(&random_field(3));
        let cut = 20 + 8 * 512 + 100;
        match decode(&bytes[..cut]) {
            Err(SnapshotError::Truncated { expected, found }) => {
                assert_eq!(expected, bytes.len());
                assert_eq!(found, cut);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode(&bytes[..10]),
            Err(SnapshotError::Truncated { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn encode_decode_is_identity_on_bytes(seed in any::<u64>()) {
            let bytes = encode(&random_field(seed));
            let again = encode(&decode(&bytes).unwrap());
            prop_assert_eq!(bytes, again);
        }
    }
}
