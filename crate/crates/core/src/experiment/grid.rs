use crate::error::{Error, Result};

/// One misclassified example, in evaluation order.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTile {
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    /// `H×W×C` values in `[0,1]`.
    pub pixels: Vec<f32>,
}

/// Indices, truths and predictions of the first `max` mistakes.
pub fn collect_errors(predictions: &[usize], labels: &[usize], max: usize) -> Vec<(usize, usize, usize)> {
    predictions
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (p, y))| p != y)
        .map(|(i, (&p, &y))| (i, y, p))
        .take(max)
        .collect()
}

// 5×7 glyphs, one byte per row, low five bits used, MSB-first.
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        _ => [0; 7],
    }
}

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            rgb: vec![255; w * h * 3],
        }
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.w && y < self.h {
            let i = (y * self.w + x) * 3;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn text(&mut self, x: usize, y: usize, s: &str, color: [u8; 3]) {
        for (k, ch) in s.chars().enumerate() {
            for (row, bits) in glyph(ch).iter().enumerate() {
                for col in 0..5 {
                    if bits & (0x10 >> col) != 0 {
                        self.put(x + k * 6 + col, y + row, color);
                    }
                }
            }
        }
    }

    fn png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.w as u32, self.h as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc
                .write_header()
                .map_err(|e| Error::Data(format!("png header: {e}")))?;
            writer
                .write_image_data(&self.rgb)
                .map_err(|e| Error::Data(format!("png data: {e}")))?;
        }
        Ok(out)
    }
}

/// Tiles upscaled 2×, each captioned `T<true> P<pred>`, `cols` per row.
///
/// With no tiles the image says `NO ERRORS`.
pub fn error_grid_png(tiles: &[ErrorTile], shape: (usize, usize, usize), cols: usize) -> Result<Vec<u8>> {
    let (h, w, c) = shape;
    if tiles.is_empty() {
        let mut canvas = Canvas::new(70, 20);
        canvas.text(6, 6, "NO ERRORS", [0, 0, 0]);
        return canvas.png();
    }
    if let Some(t) = tiles.iter().find(|t| t.pixels.len() != h * w * c) {
        return Err(Error::Data(format!(
            "tile {} has {} values, expected {}",
            t.index,
            t.pixels.len(),
            h * w * c
        )));
    }
    let cols = cols.clamp(1, tiles.len());
    let rows = tiles.len().div_ceil(cols);
    let (tw, th) = ((2 * w).max(44) + 4, 2 * h + 14);
    let mut canvas = Canvas::new(cols * tw, rows * th);
    for (n, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((n % cols) * tw + 2, (n / cols) * th + 2);
        for y in 0..2 * h {
            for x in 0..2 * w {
                let p = &tile.pixels[((y / 2) * w + x / 2) * c..][..c];
                let v = |k: usize| (p[k.min(c - 1)].clamp(0.0, 1.0) * 255.0).round() as u8;
                canvas.put(ox + x, oy + y, [v(0), v(1), v(2)]);
            }
        }
        let ty = oy + 2 * h + 2;
        let t = format!("T{}", tile.truth);
        canvas.text(ox, ty, &t, [0, 0, 0]);
        canvas.text(ox + 6 * (t.len() + 1), ty, &format!("P{}", tile.predicted), [200, 0, 0]);
    }
    canvas.png()
}

/// `index,true,predicted` rows for the rendered tiles.
pub fn errors_csv(tiles: &[ErrorTile]) -> String {
    let mut s = String::from("index,true,predicted\n");
    for t in tiles {
        s.push_str(&format!("{},{},{}\n", t.index, t.truth, t.predicted));
    }
    s
}
