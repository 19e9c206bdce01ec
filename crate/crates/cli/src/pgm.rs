//! Plain (ASCII, `P2`) greymap images.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Row-major pixels with their shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Greymap {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

pub fn parse_pgm(text: &str) -> CliResult<Greymap> {
    let bad = |m: &str| CliError::Config(format!("invalid PGM: {m}"));
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("expected the P2 magic number"));
    }
    let mut number = |what: &str| -> CliResult<usize> {
        tokens
            .next()
            .ok_or_else(|| bad(&format!("missing {what}")))?
            .parse()
            .map_err(|_| bad(&format!("{what} is not a non-negative integer")))
    };
    let cols = number("width")?;
    let rows = number("height")?;
    let maxval = number("maximum value")?;
    if rows == 0 || cols == 0 || maxval == 0 {
        return Err(bad("empty image"));
    }
    let mut pixels = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let v = number("pixel")?;
        if v > maxval {
            return Err(bad("pixel above the maximum value"));
        }
        pixels.push(v as f64);
    }
    Ok(Greymap { rows, cols, pixels })
}

pub fn read_pgm(path: &Path) -> CliResult<Greymap> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_pgm(&text)
}

/// Rounds and clamps to `0..=255`.
pub fn format_pgm(img: &Greymap) -> String {
    let mut out = format!("P2\n{} {}\n255\n", img.cols, img.rows);
    for row in img.pixels.chunks(img.cols) {
        let line: Vec<String> = row
            .iter()
            .map(|v| (v.round().clamp(0.0, 255.0) as u8).to_string())
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn write_pgm(path: &Path, img: &Greymap) -> CliResult<()> {
    std::fs::write(path, format_pgm(img)).map_err(CliError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comments() {
        let img = parse_pgm("P2\n# made by hand\n3 2\n255\n0 10 20\n30 40 255\n").unwrap();
        assert_eq!((img.rows, img.cols), (2, 3));
        assert_eq!(img.pixels[5], 255.0);
        assert_eq!(parse_pgm(&format_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn writer_clamps_and_rounds() {
        let img = Greymap {
            rows: 1,
            cols: 3,
            pixels: vec![-4.0, 12.6, 300.0],
        };
        assert_eq!(format_pgm(&img), "P2\n3 1\n255\n0 13 255\n");
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(parse_pgm("P5\n1 1\n255\n0\n").is_err());
        assert!(parse_pgm("P2\n2 2\n255\n0 1 2\n").is_err());
        assert!(parse_pgm("P2\n1 1\n10\n11\n").is_err());
    }
}
