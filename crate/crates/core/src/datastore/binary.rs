//! Little-endian primitives shared by the embedding and score-matrix files.

use crate::error::{Error, Result};

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(magic);
        Writer { buf }
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str_u32(&mut self, s: &str) -> Result<()> {
        let len = u32::try_from(s.len()).map_err(|_| Error::Format("string too long".into()))?;
        self.u32(len);
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    pub fn str_u16(&mut self, s: &str) -> Result<()> {
        let len = u16::try_from(s.len())
            .map_err(|_| Error::Format(format!("table entry longer than 65535 bytes: {:.32}...", s)))?;
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    pub fn f32s(&mut self, values: &[f32]) {
        self.buf.reserve(values.len() * 4);
        for v in values {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return Err(Error::Format(format!(
                "bad magic (expected {:?})",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(Reader { bytes, pos: 4 })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated file while reading {what}")))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn utf8(b: &[u8], what: &str) -> Result<String> {
        String::from_utf8(b.to_vec()).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
    }

    pub fn str_u32(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let b = self.take(len, what)?;
        Self::utf8(b, what)
    }

    pub fn str_u16(&mut self, what: &str) -> Result<String> {
        let b = self.take(2, what)?;
        let len = u16::from_le_bytes([b[0], b[1]]) as usize;
        let b = self.take(len, what)?;
        Self::utf8(b, what)
    }

    pub fn table(&mut self, count: usize, what: &str) -> Result<Vec<String>> {
        (0..count).map(|_| self.str_u16(what)).collect()
    }

    pub fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let n = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{what} size overflows")))?;
        let b = self.take(n, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
