//! PGM (P2 ASCII / P5 binary) reading and P5 writing, maxval up to 255.

use crate::error::PgmError;
use crate::image::Image;

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() && self.data[self.pos] != b'#' {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<u32, PgmError> {
        let tok = self
            .token()
            .ok_or_else(|| PgmError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("invalid {what} {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Decode a P2 or P5 greymap. The image depth becomes `maxval + 1`.
pub fn read_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    let binary = match cur.token() {
        Some(b"P5") => true,
        Some(b"P2") => false,
        Some(other) => {
            return Err(PgmError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
        None => return Err(PgmError::MalformedHeader("missing magic".into())),
    };
    let width = cur.header_number("width")? as usize;
    let height = cur.header_number("height")? as usize;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!("empty extent {width}x{height}")));
    }
    if maxval == 0 {
        return Err(PgmError::MalformedHeader("maxval 0".into()));
    }
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge(maxval));
    }
    let expected = width * height;
    let mut pixels = Vec::with_capacity(expected);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(PgmError::MalformedHeader("missing separator after maxval".into())),
        }
        let raster = &bytes[cur.pos..];
        if raster.len() < expected {
            return Err(PgmError::Truncated { expected, found: raster.len() });
        }
        pixels.extend_from_slice(&raster[..expected]);
    } else {
        while pixels.len() < expected {
            let Some(tok) = cur.token() else {
                return Err(PgmError::Truncated { expected, found: pixels.len() });
            };
            let value = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| PgmError::MalformedHeader(format!("invalid sample {:?}", String::from_utf8_lossy(tok))))?;
            if value > maxval {
                return Err(PgmError::SampleOutOfRange { value, maxval });
            }
            pixels.push(value as u8);
        }
    }
    if let Some(&v) = pixels.iter().find(|&&v| u32::from(v) > maxval) {
        return Err(PgmError::SampleOutOfRange { value: v.into(), maxval });
    }
    Image::with_depth(width, height, (maxval + 1) as u16, pixels)
        .map_err(|e| PgmError::MalformedHeader(e.to_string()))
}

/// Encode as binary P5 with `maxval = Q - 1`.
pub fn write_pgm(image: &Image) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", image.width(), image.height(), image.grey_depth() - 1);
    let mut out = Vec::with_capacity(header.len() + image.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_binary() {
        let mut data = b"P5 2 2 255\n".to_vec();
        data.extend_from_slice(&[0, 1, 254, 255]);
        let img = read_pgm(&data).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 1, 254, 255]);
        assert_eq!(img.grey_depth(), 256);
    }

    #[test]
    fn ascii_with_comments_matches_binary() {
        let ascii = b"P2\n# a comment\n3 2\n# another\n255\n0 10 20\n30 40 255\n";
        let mut binary = b"P5\n3 2\n255\n".to_vec();
        binary.extend_from_slice(&[0, 10, 20, 30, 40, 255]);
        assert_eq!(read_pgm(ascii).unwrap(), read_pgm(&binary).unwrap());
    }

    #[test]
    fn distinct_parse_errors() {
        assert!(matches!(read_pgm(b"P6 1 1 255\n\0"), Err(PgmError::MalformedHeader(_))));
        assert!(matches!(read_pgm(b"P5 x 1 255\n\0"), Err(PgmError::MalformedHeader(_))));
        assert_eq!(read_pgm(b"P5 1 1 65535\n\0\0"), Err(PgmError::MaxvalTooLarge(65535)));
        assert_eq!(read_pgm(b"P5 2 2 255\n\0\0"), Err(PgmError::Truncated { expected: 4, found: 2 }));
        assert_eq!(read_pgm(b"P2 2 1 255\n7"), Err(PgmError::Truncated { expected: 2, found: 1 }));
        assert!(matches!(read_pgm(b"P2 1 1 15\n16"), Err(PgmError::SampleOutOfRange { .. })));
    }

    #[test]
    fn small_maxval_sets_depth() {
        let img = read_pgm(b"P2 2 1 15\n0 15\n").unwrap();
        assert_eq!(img.grey_depth(), 16);
        assert_eq!(read_pgm(&write_pgm(&img)).unwrap(), img);
    }

    proptest! {
        #[test]
        fn write_read_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
            let img = Image::new(w, h, pixels).unwrap();
            prop_assert_eq!(read_pgm(&write_pgm(&img)).unwrap(), img);
        }
    }
}
