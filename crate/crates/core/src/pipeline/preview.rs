use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::figure::{ParsingMap, PartLabel, SketchRaster};

/// Opacity of ink drawn over the label colours.
pub const INK_OPACITY: f64 = 0.85;

/// Label colours for the preview compositor, indexed by label code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub version: u32,
    pub colors: [Option<[u8; 3]>; 9],
}

impl Palette {
    pub fn color(&self, label: PartLabel) -> Option<[u8; 3]> {
        self.colors[label.code() as usize]
    }

    pub fn hex(&self, label: PartLabel) -> Option<String> {
        self.color(label)
            .map(|[r, g, b]| format!("#{r:02X}{g:02X}{b:02X}"))
    }
}

impl Default for Palette {
    /// Version 1: hair `#8C564B`, face `#FFBB78`, top clothes `#1F77B4`,
    /// bottom clothes `#2CA02C`, left arm `#FF7F0E`, right arm `#D62728`,
    /// left leg `#9467BD`, right leg `#E377C2`.
    fn default() -> Self {
        Palette {
            version: 1,
            colors: [
                None,
                Some([0x8C, 0x56, 0x4B]),
                Some([0xFF, 0xBB, 0x78]),
                Some([0x1F, 0x77, 0xB4]),
                Some([0x2C, 0xA0, 0x2C]),
                Some([0xFF, 0x7F, 0x0E]),
                Some([0xD6, 0x27, 0x28]),
                Some([0x94, 0x67, 0xBD]),
                Some([0xE3, 0x77, 0xC2]),
            ],
        }
    }
}

/// Packed RGB8 image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Fills every labelled pixel with its palette colour on a white background
/// and darkens it by the ink: `round(c * (1 - 0.85 * ink))` per channel.
pub fn compose_preview(
    sketch: &SketchRaster,
    parsing: &ParsingMap,
    palette: &Palette,
) -> Result<RgbImage> {
    if (sketch.width(), sketch.height()) != (parsing.width(), parsing.height()) {
        return Err(Error::SizeMismatch {
            sketch: (sketch.width() as u32, sketch.height() as u32),
            labels: (parsing.width() as u32, parsing.height() as u32),
        });
    }
    for label in parsing.present_labels() {
        if palette.color(label).is_none() {
            return Err(Error::PaletteMissingLabel(label.code()));
        }
    }
    let (w, h) = (sketch.width(), sketch.height());
    let mut data = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        for x in 0..w {
            let base = parsing
                .label_at(x, y)
                .and_then(|l| palette.color(l))
                .unwrap_or([255, 255, 255]);
            let keep = 1.0 - INK_OPACITY * sketch.get(x, y);
            data.extend(base.iter().map(|c| (*c as f64 * keep).round() as u8));
        }
    }
    Ok(RgbImage {
        width: w,
        height: h,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_inputs_are_white() {
        let img = compose_preview(
            &SketchRaster::blank(5, 3),
            &ParsingMap::blank(5, 3),
            &Palette::default(),
        )
        .unwrap();
        assert!(img.data.iter().all(|&b| b == 255));
    }

    #[test]
    fn flat_label_is_the_palette_colour() {
        let parsing = ParsingMap::from_codes(3, 3, vec![4; 9]).unwrap();
        let img =
            compose_preview(&SketchRaster::blank(3, 3), &parsing, &Palette::default()).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(img.pixel(x, y), [0x2C, 0xA0, 0x2C]);
            }
        }
    }

    #[test]
    fn four_by_four_fixture() {
        #[rustfmt::skip]
        let codes = vec![
            0, 1, 1, 0,
            2, 2, 3, 3,
            5, 6, 7, 8,
            0, 0, 4, 4,
        ];
        #[rustfmt::skip]
        let ink = vec![
            0.0, 1.0, 0.0, 0.2,
            0.0, 0.5, 0.0, 1.0,
            0.0, 0.0, 0.0, 0.0,
            1.0, 0.0, 0.4, 0.0,
        ];
        let img = compose_preview(
            &SketchRaster::from_vec(4, 4, ink).unwrap(),
            &ParsingMap::from_codes(4, 4, codes).unwrap(),
            &Palette::default(),
        )
        .unwrap();
        // hand-evaluated round(c * (1 - 0.85 * ink))
        #[rustfmt::skip]
        let expected: [[u8; 3]; 16] = [
            [255, 255, 255], [21, 13, 11],    [140, 86, 75],   [212, 212, 212],
            [255, 187, 120], [147, 108, 69],  [31, 119, 180],  [5, 18, 27],
            [255, 127, 14],  [214, 39, 40],   [148, 103, 189], [227, 119, 194],
            [38, 38, 38],    [255, 255, 255], [29, 106, 29],   [44, 160, 44],
        ];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(img.pixel(i % 4, i / 4), *e, "pixel {i}");
        }
    }

    #[test]
    fn missing_colour_is_an_error() {
        let mut palette = Palette::default();
        palette.colors[6] = None;
        let parsing = ParsingMap::from_codes(2, 1, vec![0, 6]).unwrap();
        let err = compose_preview(&SketchRaster::blank(2, 1), &parsing, &palette).unwrap_err();
        assert!(matches!(err, Error::PaletteMissingLabel(6)));
    }
}
