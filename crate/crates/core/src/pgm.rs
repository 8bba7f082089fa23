//! Binary greyscale PGM (P5, maxval 255).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit greyscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "image shape mismatch");
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8], origin: &Path) -> Result<Self> {
        let err = |msg: &str| Error::Parse {
            path: origin.to_path_buf(),
            msg: msg.to_string(),
        };
        // header: magic, width, height, maxval, separated by whitespace and
        // optional comments, then exactly one whitespace byte
        let mut fields = Vec::with_capacity(4);
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
                if bytes[i] == b'#' {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                } else {
                    i += 1;
                }
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(err("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| err("bad header"))?);
        }
        if fields[0] != "P5" {
            return Err(err("not a binary PGM (P5)"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err("bad header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(err("only maxval 255 is supported"));
        }
        let data = bytes.get(i + 1..).ok_or_else(|| err("missing pixel data"))?;
        if data.len() != width * height {
            return Err(err("pixel data length does not match header"));
        }
        Ok(Self::new(width, height, data.to_vec()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }

    /// Sets the clipped `(2r+1)²` square around `(cx, cy)` to `value`.
    pub fn mark(&mut self, cx: i32, cy: i32, r: i32, value: u8) {
        for y in (cy - r).max(0)..=(cy + r).min(self.height as i32 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(self.width as i32 - 1) {
                self.pixels[y as usize * self.width + x as usize] = value;
            }
        }
    }
}
