//! Little-endian cursor helpers shared by the binary formats.

use crate::error::DecodeError;

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if n > self.remaining() {
            return Err(DecodeError::Truncated(self.buf.len()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    /// Reads `count` fixed-width items after checking the input is long enough, so a
    /// corrupt count cannot trigger a huge allocation.
    fn items<T>(&mut self, count: usize, width: usize, f: impl Fn(&[u8]) -> T) -> Result<Vec<T>, DecodeError> {
        let len = count
            .checked_mul(width)
            .ok_or_else(|| DecodeError::Header("element count overflows".into()))?;
        Ok(self.take(len)?.chunks_exact(width).map(f).collect())
    }

    pub fn u32s(&mut self, count: usize) -> Result<Vec<u32>, DecodeError> {
        self.items(count, 4, |c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
    }

    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>, DecodeError> {
        self.items(count, 4, |c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
    }

    pub fn f64s(&mut self, count: usize) -> Result<Vec<f64>, DecodeError> {
        self.items(count, 8, |c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> u32 {
    u32::try_from(v).unwrap_or_else(|_| panic!("{what} = {v} does not fit in u32"))
}
