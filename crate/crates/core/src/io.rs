//! MPOVF1 field files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size        content
//! 0       8           magic "MPOVF1\0\0"
//! 8       4           u32 nx
//! 12      4           u32 ny
//! 16      8           f64 dx (meters)
//! 24      8           f64 wavelength (meters)
//! 32      16*nx*ny    row-major (re: f64, im: f64) pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec};

pub const MAGIC: [u8; 8] = *b"MPOVF1\0\0";
pub const HEADER_LEN: usize = 32;

pub fn write_field_to(field: &ComplexField, mut out: impl Write) -> Result<()> {
    let g = field.grid();
    let mut header = [0u8; HEADER_LEN];
    header[..8].copy_from_slice(&MAGIC);
    header[8..12].copy_from_slice(&(g.nx() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(g.ny() as u32).to_le_bytes());
    header[16..24].copy_from_slice(&g.dx().to_le_bytes());
    header[24..32].copy_from_slice(&g.wavelength().to_le_bytes());
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(16 * g.nx());
    for row in field.values().chunks(g.nx()) {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_field_from(mut input: impl Read) -> Result<ComplexField> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut input, &mut header)?;
    if got < 8 || header[..8] != MAGIC {
        let mut found = [0u8; 8];
        found[..got.min(8)].copy_from_slice(&header[..got.min(8)]);
        return Err(Error::BadMagic { found });
    }
    if got < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            found: got as u64,
        });
    }
    let nx = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let dx = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let wavelength = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let grid = GridSpec::new(nx, ny, dx, wavelength)?;

    let payload_len = 16 * grid.len();
    let mut payload = vec![0u8; payload_len];
    let got = read_up_to(&mut input, &mut payload)?;
    if got < payload_len {
        return Err(Error::Truncated {
            expected: (HEADER_LEN + payload_len) as u64,
            found: (HEADER_LEN + got) as u64,
        });
    }
    let values: Vec<Complex64> = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    ComplexField::new(grid, values)
}

fn read_up_to(input: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match input.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn write_field(field: &ComplexField, path: impl AsRef<Path>) -> Result<()> {
    write_field_to(field, BufWriter::new(File::create(path)?))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    read_field_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    fn encode(field: &ComplexField) -> Vec<u8> {
        let mut buf = Vec::new();
        write_field_to(field, &mut buf).unwrap();
        buf
    }

    fn sample_field() -> ComplexField {
        let g = make_grid(16, 20, 3e-6, 795e-9).unwrap();
        ComplexField::from_fn(g, |x, y| Complex64::new(x * 1e5, -y * 1e5)).unwrap()
    }

    #[test]
    fn header_layout() {
        let buf = encode(&sample_field());
        assert_eq!(&buf[..8], b"MPOVF1\0\0");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 16);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 20);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 3e-6);
        assert_eq!(buf.len(), HEADER_LEN + 16 * 16 * 20);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.mpovf");
        let f = sample_field();
        write_field(&f, &path).unwrap();
        assert_eq!(read_field(&path).unwrap(), f);
    }

    #[test]
    fn bad_magic() {
        let mut buf = encode(&sample_field());
        buf[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_field_from(&buf[..]), Err(Error::BadMagic { .. })));
        assert!(matches!(read_field_from(&b"XXXX"[..]), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload() {
        let buf = encode(&sample_field());
        let cut = &buf[..buf.len() - 17];
        assert!(matches!(read_field_from(cut), Err(Error::Truncated { .. })));
        assert!(matches!(read_field_from(&buf[..20]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn non_finite_payload() {
        let mut buf = encode(&sample_field());
        let at = HEADER_LEN + 16 * 5 + 8;
        buf[at..at + 8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_field_from(&buf[..]), Err(Error::NonFinite { index: 5 })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in proptest::collection::vec(any::<f64>(), 2 * 16 * 16)) {
            let g = make_grid(16, 16, 1e-6, 795e-9).unwrap();
            let values: Vec<Complex64> = bits
                .chunks(2)
                .map(|c| Complex64::new(
                    if c[0].is_finite() { c[0] } else { 0.0 },
                    if c[1].is_finite() { c[1] } else { -0.0 },
                ))
                .collect();
            let f = ComplexField::new(g, values).unwrap();
            let back = read_field_from(&encode(&f)[..]).unwrap();
            for (a, b) in f.values().iter().zip(back.values()) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
