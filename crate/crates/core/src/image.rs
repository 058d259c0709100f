//! Square 8-bit grayscale rasters and their PGM/PNG codecs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `edge × edge` grayscale image, row-major. Unwritten pixels are 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    edge: usize,
    pixels: Vec<u8>,
    pub label: String,
}

impl GrayImage {
    pub fn black(edge: usize, label: impl Into<String>) -> Self {
        GrayImage {
            edge,
            pixels: vec![0; edge * edge],
            label: label.into(),
        }
    }

    pub fn from_pixels(edge: usize, pixels: Vec<u8>, label: impl Into<String>) -> Result<Self> {
        if pixels.len() != edge * edge {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pixels", edge * edge),
                got: format!("{} pixels", pixels.len()),
            });
        }
        Ok(GrayImage {
            edge,
            pixels,
            label: label.into(),
        })
    }

    /// Builds an image from nested rows; panics if the rows are not square.
    pub fn from_rows(rows: &[&[u8]], label: impl Into<String>) -> Self {
        let edge = rows.len();
        assert!(rows.iter().all(|r| r.len() == edge), "rows must form a square");
        GrayImage {
            edge,
            pixels: rows.concat(),
            label: label.into(),
        }
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.edge + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.edge + col] = value;
    }

    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub fn nonzero_positions(&self) -> Vec<(usize, usize)> {
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0)
            .map(|(k, _)| (k / self.edge, k % self.edge))
            .collect()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.edge, self.edge)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pixels.len() + 16);
        self.write_pgm(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_pgm(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Reads a square binary PGM with maxval 255.
    pub fn read_pgm<R: Read>(input: R, label: impl Into<String>) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            let token = next_token(&mut reader)?;
            tokens.push(token);
        }
        if tokens[0] != "P5" {
            return Err(Error::Image(format!("unsupported PNM magic `{}`", tokens[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Image(format!("bad PGM header field `{s}`")))
        };
        let (width, height, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if width != height {
            return Err(Error::Image(format!("expected a square image, got {width}x{height}")));
        }
        if maxval != 255 {
            return Err(Error::Image(format!("expected maxval 255, got {maxval}")));
        }
        let mut pixels = vec![0u8; width * height];
        reader
            .read_exact(&mut pixels)
            .map_err(|e| Error::Image(format!("truncated PGM raster: {e}")))?;
        GrayImage::from_pixels(width, pixels, label)
    }

    pub fn load_pgm(path: impl AsRef<Path>, label: impl Into<String>) -> Result<Self> {
        GrayImage::read_pgm(File::open(path)?, label)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        let mut encoder = png::Encoder::new(file, self.edge as u32, self.edge as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| Error::Image(e.to_string()))?;
        writer
            .write_image_data(&self.pixels)
            .map_err(|e| Error::Image(e.to_string()))?;
        writer.finish().map_err(|e| Error::Image(e.to_string()))?;
        Ok(())
    }
}

// Single whitespace byte after maxval separates the header from the raster.
fn next_token<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut token = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte)? == 0 {
            return Err(Error::Image("unexpected end of PGM header".into()));
        }
        let c = byte[0];
        if c == b'#' && token.is_empty() {
            let mut comment = Vec::new();
            reader.read_until(b'\n', &mut comment)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(token);
        }
        token.push(c as char);
    }
}
