//! `.idrp` binary layout (all integers little-endian):
//!
//! ```text
//! magic    "IDRP"          4 bytes
//! version  u16 = 1
//! flags    u16 = 0
//! model_name      u32 byte count + UTF-8
//! manuscript_id   u32 byte count + UTF-8
//! L, m, v         u32 each
//! v labels        u32 byte count + UTF-8 each
//! payload         L·v·m f32, layer-major, then vector, then dimension
//! ```

use std::fs;
use std::path::Path;

use super::{RepError, RepTensor};

pub const MAGIC: [u8; 4] = *b"IDRP";
pub const FORMAT_VERSION: u16 = 1;

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn encode(tensor: &RepTensor) -> Result<Vec<u8>, RepError> {
    tensor.validate()?;
    let labels_len: usize = tensor.vector_labels.iter().map(|l| 4 + l.len()).sum();
    let mut out = Vec::with_capacity(
        8 + 8
            + tensor.model_name.len()
            + tensor.manuscript_id.len()
            + 12
            + labels_len
            + 4 * tensor.data.len(),
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    push_str(&mut out, &tensor.model_name);
    push_str(&mut out, &tensor.manuscript_id);
    for dim in [tensor.num_layers, tensor.hidden_dim, tensor.num_vectors] {
        let dim = u32::try_from(dim)
            .map_err(|_| RepError::Invalid(format!("dimension {dim} exceeds u32")))?;
        out.extend_from_slice(&dim.to_le_bytes());
    }
    for label in &tensor.vector_labels {
        push_str(&mut out, label);
    }
    for v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], RepError> {
        if self.remaining() < n {
            return Err(RepError::Truncated {
                what,
                needed: n as u64,
                available: self.remaining() as u64,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, RepError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, RepError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<String, RepError> {
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| RepError::Invalid(format!("{what} is not valid UTF-8")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<RepTensor, RepError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(RepError::BadMagic(magic));
    }
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(RepError::UnsupportedVersion(version));
    }
    let flags = cur.u16("flags")?;
    if flags != 0 {
        return Err(RepError::UnsupportedFlags(flags));
    }
    let model_name = cur.string("model_name")?;
    let manuscript_id = cur.string("manuscript_id")?;
    let num_layers = cur.u32("num_layers")? as u64;
    let hidden_dim = cur.u32("hidden_dim")? as u64;
    let num_vectors = cur.u32("num_vectors")? as u64;
    if num_layers == 0 || hidden_dim == 0 || num_vectors == 0 {
        return Err(RepError::Invalid(format!(
            "dimensions must be positive (L={num_layers}, m={hidden_dim}, v={num_vectors})"
        )));
    }
    // Each label needs at least its 4-byte length prefix; bail before
    // allocating for an absurd label count.
    if num_vectors.saturating_mul(4) > cur.remaining() as u64 {
        return Err(RepError::Truncated {
            what: "vector labels",
            needed: num_vectors * 4,
            available: cur.remaining() as u64,
        });
    }
    let mut vector_labels = Vec::with_capacity(num_vectors as usize);
    for _ in 0..num_vectors {
        vector_labels.push(cur.string("vector label")?);
    }

    let count = num_layers
        .checked_mul(num_vectors)
        .and_then(|x| x.checked_mul(hidden_dim))
        .ok_or_else(|| RepError::LengthMismatch("L·v·m overflows".into()))?;
    let payload_bytes = count
        .checked_mul(4)
        .ok_or_else(|| RepError::LengthMismatch("payload size overflows".into()))?;
    let available = cur.remaining() as u64;
    if payload_bytes > available {
        return Err(RepError::Truncated {
            what: "payload",
            needed: payload_bytes,
            available,
        });
    }
    if payload_bytes < available {
        return Err(RepError::LengthMismatch(format!(
            "{} trailing bytes after a {payload_bytes}-byte payload",
            available - payload_bytes
        )));
    }
    let data: Vec<f32> = cur
        .take(payload_bytes as usize, "payload")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();

    RepTensor::new(
        manuscript_id,
        model_name,
        num_layers as usize,
        hidden_dim as usize,
        vector_labels,
        data,
    )
}

pub fn write_reps(tensor: &RepTensor, path: &Path) -> Result<(), RepError> {
    let bytes = encode(tensor)?;
    fs::write(path, bytes).map_err(|source| RepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_reps(path: &Path) -> Result<RepTensor, RepError> {
    let bytes = fs::read(path).map_err(|source| RepError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RepTensor {
        RepTensor::new(
            "paper-1",
            "toy",
            2,
            4,
            vec!["last".into()],
            vec![0.5, -1.25, 3.0, f32::MIN_POSITIVE, 1e-30, -0.0, 7.5, 1e30],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("paper-1.idrp");
        write_reps(&t, &path).unwrap();
        let back = read_reps(&path).unwrap();
        assert_eq!(back.manuscript_id, t.manuscript_id);
        assert_eq!(back.vector_labels, t.vector_labels);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&t.data));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&small()).unwrap();
        assert_eq!(&bytes[..4], b"IDRP");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..15], b"toy");
        // header + 8 floats
        assert_eq!(bytes.len(), 8 + 7 + 11 + 12 + 8 + 32);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&small()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(RepError::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn unsupported_version() {
        let mut bytes = encode(&small()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(RepError::UnsupportedVersion(2))));
    }

    #[test]
    fn payload_shorter_than_declared() {
        let bytes = encode(&small()).unwrap();
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(
            decode(cut),
            Err(RepError::Truncated { what: "payload", .. })
        ));
    }

    #[test]
    fn inflated_dimension_is_truncation_not_allocation() {
        let mut bytes = encode(&small()).unwrap();
        // L field sits after magic/version/flags and the two strings.
        let l_off = 8 + 4 + 3 + 4 + 7;
        bytes[l_off..l_off + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(RepError::Truncated { .. })));
    }

    #[test]
    fn trailing_bytes_are_a_length_mismatch() {
        let mut bytes = encode(&small()).unwrap();
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode(&bytes), Err(RepError::LengthMismatch(_))));
    }

    #[test]
    fn empty_file_is_truncated() {
        assert!(matches!(decode(&[]), Err(RepError::Truncated { what: "magic", .. })));
    }
}
