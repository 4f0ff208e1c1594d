//! Entropy-coded segment bit reader with byte unstuffing and marker detection.

use super::error::{DecodeError, Result};

pub(crate) struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u64,
    nbits: u32,
    // zero bits appended after a marker or the end of data
    padding: u32,
    marker: Option<u8>,
    eof: bool,
    overrun: bool,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self {
            data,
            pos: 0,
            acc: 0,
            nbits: 0,
            padding: 0,
            marker: None,
            eof: false,
            overrun: false,
        }
    }

    /// Byte offset just past the consumed entropy data (at a marker when one was found).
    pub fn position(&self) -> usize {
        self.pos
    }

    fn fill(&mut self) {
        while self.nbits <= 56 {
            if self.marker.is_some() || self.eof {
                self.nbits += 8;
                self.padding += 8;
                continue;
            }
            let Some(&byte) = self.data.get(self.pos) else {
                self.eof = true;
                continue;
            };
            if byte == 0xFF {
                // skip fill bytes
                let mut next = self.pos + 1;
                while self.data.get(next) == Some(&0xFF) {
                    next += 1;
                }
                match self.data.get(next) {
                    Some(0x00) => {
                        self.pos = next + 1;
                        self.acc |= 0xFF << (56 - self.nbits);
                        self.nbits += 8;
                    }
                    Some(&m) => {
                        self.pos = next - 1;
                        self.marker = Some(m);
                    }
                    None => {
                        self.pos = next;
                        self.eof = true;
                    }
                }
                continue;
            }
            self.pos += 1;
            self.acc |= (byte as u64) << (56 - self.nbits);
            self.nbits += 8;
        }
    }

    pub fn peek16(&mut self) -> Result<u32> {
        if self.nbits < 16 {
            self.fill();
        }
        Ok((self.acc >> 48) as u32)
    }

    pub fn consume(&mut self, n: u32) {
        debug_assert!(n <= self.nbits);
        if n > self.nbits - self.padding {
            self.overrun = true;
        }
        self.acc <<= n;
        self.nbits -= n;
        self.padding = self.padding.min(self.nbits);
    }

    pub fn bits(&mut self, n: u32) -> Result<u32> {
        if n == 0 {
            return Ok(0);
        }
        if self.nbits < n {
            self.fill();
        }
        let v = (self.acc >> (64 - n)) as u32;
        self.consume(n);
        Ok(v)
    }

    /// Reads `size` magnitude bits and sign-extends them (F.2.2.1 EXTEND).
    pub fn receive_extend(&mut self, size: u8) -> Result<i32> {
        if size == 0 {
            return Ok(0);
        }
        let v = self.bits(size as u32)? as i32;
        if v < 1 << (size - 1) {
            Ok(v - (1 << size) + 1)
        } else {
            Ok(v)
        }
    }

    /// Fails if decoding has consumed bits that were not in the stream.
    pub fn check_overrun(&self) -> Result<()> {
        if !self.overrun {
            return Ok(());
        }
        if self.eof && self.marker.is_none() {
            Err(DecodeError::TruncatedStream)
        } else {
            Err(DecodeError::CorruptEntropyStream(
                "entropy data ran into a marker".into(),
            ))
        }
    }

    /// Discards buffered bits and consumes the next marker, returning its code.
    pub fn take_marker(&mut self) -> Result<Option<u8>> {
        self.acc = 0;
        self.nbits = 0;
        self.padding = 0;
        if self.marker.is_none() && !self.eof {
            // locate the marker after any byte-aligned padding
            match self.data.get(self.pos) {
                Some(0xFF) => {
                    let mut next = self.pos + 1;
                    while self.data.get(next) == Some(&0xFF) {
                        next += 1;
                    }
                    match self.data.get(next) {
                        Some(0x00) => return Ok(None),
                        Some(&m) => {
                            self.pos = next - 1;
                            self.marker = Some(m);
                        }
                        None => self.eof = true,
                    }
                }
                Some(_) => return Ok(None),
                None => {}
            }
            if self.data.get(self.pos).is_none() {
                self.eof = true;
            }
        }
        match self.marker.take() {
            Some(m) => {
                self.pos += 2;
                Ok(Some(m))
            }
            None if self.eof => Err(DecodeError::TruncatedStream),
            None => Ok(None),
        }
    }

    pub fn reset_after_restart(&mut self) {
        self.overrun = false;
        self.eof = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unstuffs_and_stops_at_marker() {
        let data = [0b1010_0000, 0xFF, 0x00, 0x12, 0xFF, 0xD9];
        let mut r = BitReader::new(&data);
        assert_eq!(r.bits(3).unwrap(), 0b101);
        assert_eq!(r.bits(5).unwrap(), 0);
        assert_eq!(r.bits(8).unwrap(), 0xFF);
        assert_eq!(r.bits(8).unwrap(), 0x12);
        assert!(r.check_overrun().is_ok());
        assert_eq!(r.bits(4).unwrap(), 0);
        assert!(r.check_overrun().is_err());
        assert_eq!(r.take_marker().unwrap(), Some(0xD9));
        assert_eq!(r.position(), data.len());
    }

    #[test]
    fn extend_matches_table_f_12() {
        // size 3: 000..011 are -7..-4, 100..111 are 4..7
        for (bits, want) in [(0b000u8, -7), (0b011, -4), (0b100, 4), (0b111, 7)] {
            let data = [bits << 5, 0];
            let mut r = BitReader::new(&data);
            assert_eq!(r.receive_extend(3).unwrap(), want);
        }
    }

    #[test]
    fn truncation_detected_at_eof() {
        let data = [0xAB];
        let mut r = BitReader::new(&data);
        r.bits(8).unwrap();
        r.bits(1).unwrap();
        assert_eq!(r.check_overrun(), Err(DecodeError::TruncatedStream));
    }
}
