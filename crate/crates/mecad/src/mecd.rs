//! MECD: the binary patch-embedding dataset format.
//!
//! All integers are little-endian `u32`, floats little-endian IEEE-754 `f32`,
//! strings a `u32` byte length followed by UTF-8.
//!
//! ```text
//! header   "MECD" | version = 1 | dim | class_count
//! class    name | train_count | test_count | train records | test records
//! record   image_id | label: u8 (0 normal, 1 anomalous) | grid_h | grid_w
//!          | grid_h * grid_w * dim floats (row-major grid, patch-major)
//! ```

use std::io::{Read, Write};

use mecad_core::{ClassData, ClassStream, EmbeddingRecord, Embeddings, Label};

use crate::error::{FormatError, Result};

pub const MAGIC: [u8; 4] = *b"MECD";
pub const VERSION: u32 = 1;

pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| FormatError::Invalid(format!("{v} does not fit in u32")))?;
        self.buf.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    pub fn string(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    pub fn floats(&mut self, values: &[f32]) {
        self.buf.reserve(values.len() * 4);
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::Truncated { offset: self.pos, what, needed: n, available: self.remaining() });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<(), FormatError> {
        let found: [u8; 4] = self.take(4, "magic")?.try_into().expect("4 bytes");
        if found != expected {
            return Err(FormatError::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &'static str) -> Result<usize, FormatError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    pub fn string(&mut self, what: &'static str) -> Result<String, FormatError> {
        let len = self.u32(what)?;
        let at = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| FormatError::Utf8 { offset: at, what })
    }

    /// `rows * dim` floats; the byte count is checked before allocating.
    pub fn floats(&mut self, rows: usize, dim: usize, what: &'static str) -> Result<Vec<f32>, FormatError> {
        let count = rows.checked_mul(dim).and_then(|c| c.checked_mul(4)).ok_or_else(|| {
            FormatError::Truncated { offset: self.pos, what, needed: usize::MAX, available: self.remaining() }
        })?;
        let bytes = self.take(count, what)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    pub fn finish(&self) -> Result<(), FormatError> {
        if self.remaining() > 0 {
            return Err(FormatError::TrailingBytes { offset: self.pos, count: self.remaining() });
        }
        Ok(())
    }
}

/// Serializes a validated stream. Nothing is written if validation fails.
pub fn encode_dataset(stream: &ClassStream) -> Result<Vec<u8>> {
    stream.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(&MAGIC);
    w.u32(VERSION as usize)?;
    w.u32(stream.dim)?;
    w.u32(stream.classes.len())?;
    for class in &stream.classes {
        w.string(&class.name)?;
        w.u32(class.train.len())?;
        w.u32(class.test.len())?;
        for rec in class.train.iter().chain(&class.test) {
            w.string(&rec.image_id)?;
            w.u8(rec.label.as_u8());
            w.u32(rec.grid_h)?;
            w.u32(rec.grid_w)?;
            w.floats(rec.patches.as_flat());
        }
    }
    Ok(w.buf)
}

pub fn write_dataset(stream: &ClassStream, mut sink: impl Write) -> Result<()> {
    let bytes = encode_dataset(stream)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<ClassStream> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let dim = r.u32("dimension")?;
    if dim == 0 {
        return Err(FormatError::Invalid("embedding dimension must be at least 1".into()).into());
    }
    let class_count = r.u32("class count")?;
    let mut classes = Vec::new();
    for _ in 0..class_count {
        let name = r.string("class name")?;
        let train_count = r.u32("train record count")?;
        let test_count = r.u32("test record count")?;
        let mut read_split = |count: usize| -> Result<Vec<EmbeddingRecord>> {
            let mut out = Vec::new();
            for _ in 0..count {
                let image_id = r.string("image id")?;
                let at = r.offset();
                let raw = r.u8("label")?;
                let label = Label::from_u8(raw).ok_or(FormatError::BadLabel { offset: at, value: raw })?;
                let grid_h = r.u32("grid height")?;
                let grid_w = r.u32("grid width")?;
                let patches = r.floats(grid_h.saturating_mul(grid_w), dim, "patch values")?;
                out.push(EmbeddingRecord {
                    class_name: name.clone(),
                    image_id,
                    label,
                    grid_h,
                    grid_w,
                    patches: Embeddings::from_flat(dim, patches).map_err(|e| FormatError::Invalid(e.to_string()))?,
                });
            }
            Ok(out)
        };
        let train = read_split(train_count)?;
        let test = read_split(test_count)?;
        classes.push(ClassData { name, train, test });
    }
    r.finish()?;
    let stream = ClassStream { dim, classes };
    stream.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(stream)
}

pub fn read_dataset(mut source: impl Read) -> Result<ClassStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ClassStream {
        let patches = Embeddings::from_flat(3, vec![1.0, -2.0, 0.5, 3.25, 0.0, -0.0, 1e-3, 7.0, 8.5, -9.0, 10.0, 11.0]).unwrap();
        let rec = EmbeddingRecord::new("c", "img0", Label::Normal, 2, 2, patches).unwrap();
        ClassStream::new(3, vec![ClassData { name: "c".into(), train: vec![rec], test: vec![] }]).unwrap()
    }

    #[test]
    fn empty_stream_is_header_only() {
        let bytes = encode_dataset(&ClassStream { dim: 8, classes: vec![] }).unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], b"MECD");
        assert_eq!(&bytes[4..], &[1, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn payload_layout_is_little_endian_floats() {
        let s = tiny();
        let bytes = encode_dataset(&s).unwrap();
        // header 16 | name 4+1 | counts 8 | image id 4+4 | label 1 | grid 8
        let payload_start = 16 + 5 + 8 + 8 + 1 + 8;
        let mut expected = Vec::new();
        for v in s.classes[0].train[0].patches.as_flat() {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(&bytes[payload_start..], &expected[..]);
        assert_eq!(expected.len(), 48);
        assert_eq!(&bytes[payload_start..payload_start + 4], &[0x00, 0x00, 0x80, 0x3f]);
    }

    #[test]
    fn invalid_stream_writes_nothing() {
        let mut s = tiny();
        s.classes[0].train[0].label = Label::Anomalous;
        let mut sink = Vec::new();
        assert!(write_dataset(&s, &mut sink).is_err());
        assert!(sink.is_empty());
    }

    #[test]
    fn rejects_bad_headers() {
        let mut bytes = encode_dataset(&tiny()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_dataset(&bytes), Err(crate::Error::Format(FormatError::UnsupportedVersion(2)))));
        bytes[0] = b'X';
        let err = decode_dataset(&bytes).unwrap_err();
        assert!(err.to_string().starts_with("bad magic"), "{err}");
    }

    #[test]
    fn rejects_truncation_with_offset() {
        let bytes = encode_dataset(&tiny()).unwrap();
        let cut = bytes.len() - 3;
        let err = decode_dataset(&bytes[..cut]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated payload at byte 46"), "{msg}");
    }

    #[test]
    fn rejects_trailing_and_bad_label() {
        let mut bytes = encode_dataset(&tiny()).unwrap();
        bytes.push(0);
        assert!(matches!(decode_dataset(&bytes), Err(crate::Error::Format(FormatError::TrailingBytes { .. }))));
        bytes.pop();
        bytes[16 + 5 + 8 + 8] = 7;
        assert!(matches!(decode_dataset(&bytes), Err(crate::Error::Format(FormatError::BadLabel { value: 7, .. }))));
    }

    #[test]
    fn rejects_nan_naming_the_record() {
        let mut bytes = encode_dataset(&tiny()).unwrap();
        let at = bytes.len() - 8;
        bytes[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let msg = decode_dataset(&bytes).unwrap_err().to_string();
        assert!(msg.contains("record 0") && msg.contains("non-finite value in patch 3"), "{msg}");
    }
}
