use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generator::FigureSpec;
use crate::error::{Error, Result};
use crate::figure::{
    crop_label_mask, crop_resample, BinaryMask, ParsingMap, PartLabel, PartSketch, Point,
    SketchRaster,
};
use crate::shape_space::TrainingCrop;
use crate::structure::{
    extract_figure_keypoints, part_joints, FigureKeypoints, JointId, PartKeypointSet,
};

/// Fraction of the tight label box added on every side.
pub const BOX_DILATION: f64 = 0.08;
/// Chebyshev radius, in canvas pixels, around a label region whose ink still
/// counts towards that part.
pub const INK_REACH: usize = 2;

pub const SKETCH_FILE: &str = "sketch.png";
pub const LABELS_FILE: &str = "labels.png";
pub const KEYPOINTS_FILE: &str = "keypoints.json";

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusPart {
    pub sketch: PartSketch,
    pub mask: BinaryMask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        spec: FigureSpec,
    },
    Ingested {
        dir: PathBuf,
        keypoints_extracted: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusItem {
    pub id: usize,
    pub sketch: SketchRaster,
    pub labels: ParsingMap,
    pub parts: BTreeMap<PartLabel, CorpusPart>,
    pub keypoints: FigureKeypoints,
    pub provenance: Provenance,
}

impl CorpusItem {
    pub fn part_pairs(&self) -> Vec<(PartSketch, BinaryMask)> {
        self.parts
            .values()
            .map(|p| (p.sketch.clone(), p.mask.clone()))
            .collect()
    }
}

/// Splits a labelled sketch into per-part crops: each part keeps the ink
/// within [`INK_REACH`] pixels of its label region, cropped through its tight
/// label box dilated by [`BOX_DILATION`].
pub fn part_crops(
    sketch: &SketchRaster,
    labels: &ParsingMap,
    part_size: usize,
) -> BTreeMap<PartLabel, CorpusPart> {
    let (w, h) = (sketch.width(), sketch.height());
    let mut out = BTreeMap::new();
    for label in labels.present_labels() {
        let tight = labels.label_bounds(label).unwrap();
        let mut ink = SketchRaster::blank(w, h);
        let r = INK_REACH;
        let (bx0, by0) = (tight.x as usize, tight.y as usize);
        let (bx1, by1) = (bx0 + tight.width as usize, by0 + tight.height as usize);
        for y in by0.saturating_sub(r)..(by1 + r).min(h) {
            for x in bx0.saturating_sub(r)..(bx1 + r).min(w) {
                let near = (y.saturating_sub(r)..(y + r + 1).min(h)).any(|yy| {
                    (x.saturating_sub(r)..(x + r + 1).min(w))
                        .any(|xx| labels.label_at(xx, yy) == Some(label))
                });
                if near {
                    ink.set(x, y, sketch.get(x, y));
                }
            }
        }
        let bbox = tight.dilated(BOX_DILATION);
        out.insert(
            label,
            CorpusPart {
                sketch: PartSketch {
                    label,
                    bbox,
                    crop: crop_resample(&ink, &bbox, part_size),
                },
                mask: crop_label_mask(labels, label, &bbox, part_size),
            },
        );
    }
    out
}

/// Every present part of every item, for shape-space fitting.
pub fn training_crops(items: &[CorpusItem]) -> Vec<TrainingCrop> {
    items
        .iter()
        .flat_map(|item| {
            item.parts
                .values()
                .filter(|p| !p.sketch.is_absent())
                .map(|p| TrainingCrop {
                    label: p.sketch.label,
                    crop: p.sketch.crop.clone(),
                    mask: p.mask.clone(),
                })
        })
        .collect()
}

pub fn encode_png_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let encoder = image::codecs::png::PngEncoder::new(&mut buf);
    image::ImageEncoder::write_image(
        encoder,
        pixels,
        width as u32,
        height as u32,
        image::ExtendedColorType::L8,
    )?;
    Ok(buf)
}

/// Decodes an 8-bit single-channel PNG.
pub fn decode_png_gray(bytes: &[u8], what: &str) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    match img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Ok((w as usize, h as usize, g.into_raw()))
        }
        other => Err(Error::BadPixelFormat {
            what: what.to_string(),
            found: format!("{:?}", other.color()),
        }),
    }
}

/// Ink raster to a dark-on-white grayscale PNG.
pub fn sketch_to_png(sketch: &SketchRaster) -> Result<Vec<u8>> {
    let px: Vec<u8> = sketch
        .data()
        .iter()
        .map(|v| 255 - (v * 255.0).round() as u8)
        .collect();
    encode_png_gray(sketch.width(), sketch.height(), &px)
}

pub fn sketch_from_png(bytes: &[u8]) -> Result<SketchRaster> {
    let (w, h, px) = decode_png_gray(bytes, "sketch")?;
    SketchRaster::from_vec(w, h, px.iter().map(|v| (255 - v) as f64 / 255.0).collect())
}

pub fn labels_to_png(labels: &ParsingMap) -> Result<Vec<u8>> {
    encode_png_gray(labels.width(), labels.height(), labels.codes())
}

pub fn labels_from_png(bytes: &[u8]) -> Result<ParsingMap> {
    let (w, h, px) = decode_png_gray(bytes, "labels")?;
    ParsingMap::from_codes(w, h, px)
}

#[derive(Serialize, Deserialize)]
struct KeypointFile {
    parts: Vec<KeypointEntry>,
}

#[derive(Serialize, Deserialize)]
struct KeypointEntry {
    label: PartLabel,
    joints: BTreeMap<JointId, [f64; 2]>,
}

pub fn keypoints_to_json(kps: &FigureKeypoints) -> Result<String> {
    let file = KeypointFile {
        parts: kps
            .values()
            .map(|k| KeypointEntry {
                label: k.label,
                joints: k.joints.iter().map(|(j, p)| (*j, [p.x, p.y])).collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn keypoints_from_json(text: &str) -> Result<FigureKeypoints> {
    let file: KeypointFile =
        serde_json::from_str(text).map_err(|e| Error::BadKeypoints(e.to_string()))?;
    let mut out = FigureKeypoints::new();
    for entry in file.parts {
        if out.contains_key(&entry.label) {
            return Err(Error::BadKeypoints(format!("{} listed twice", entry.label)));
        }
        let mut set = PartKeypointSet::new(entry.label);
        for (j, [x, y]) in entry.joints {
            if !part_joints(entry.label).contains(&j) {
                return Err(Error::BadKeypoints(format!(
                    "{} has no joint {j:?}",
                    entry.label
                )));
            }
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::BadKeypoints(format!(
                    "{} {j:?} is not finite",
                    entry.label
                )));
            }
            set = set.with(j, Point::new(x, y));
        }
        out.insert(entry.label, set);
    }
    Ok(out)
}

/// Writes `sketch.png`, `labels.png` and `keypoints.json` into `dir`.
pub fn export_item(item: &CorpusItem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SKETCH_FILE), sketch_to_png(&item.sketch)?)?;
    fs::write(dir.join(LABELS_FILE), labels_to_png(&item.labels)?)?;
    fs::write(
        dir.join(KEYPOINTS_FILE),
        keypoints_to_json(&item.keypoints)?,
    )?;
    Ok(())
}

fn read_required(path: PathBuf) -> Result<Vec<u8>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    Ok(fs::read(path)?)
}

/// Reads a labelled sketch from a directory. Keypoints come from
/// `keypoints.json` when present, otherwise they are extracted from the
/// part masks.
pub fn ingest_item(dir: &Path, part_size: usize) -> Result<CorpusItem> {
    let sketch = sketch_from_png(&read_required(dir.join(SKETCH_FILE))?)?;
    let labels = labels_from_png(&read_required(dir.join(LABELS_FILE))?)?;
    if (sketch.width(), sketch.height()) != (labels.width(), labels.height()) {
        return Err(Error::SizeMismatch {
            sketch: (sketch.width() as u32, sketch.height() as u32),
            labels: (labels.width() as u32, labels.height() as u32),
        });
    }
    let parts = part_crops(&sketch, &labels, part_size);
    let kp_path = dir.join(KEYPOINTS_FILE);
    let (keypoints, extracted) = if kp_path.is_file() {
        (keypoints_from_json(&fs::read_to_string(&kp_path)?)?, false)
    } else {
        let kps =
            extract_figure_keypoints(parts.iter().map(|(l, p)| (*l, &p.sketch.bbox, &p.mask)))?;
        (kps, true)
    };
    Ok(CorpusItem {
        id: 0,
        sketch,
        labels,
        parts,
        keypoints,
        provenance: Provenance::Ingested {
            dir: dir.to_path_buf(),
            keypoints_extracted: extracted,
        },
    })
}

/// Item directory name used by [`export_corpus`].
pub fn item_dir_name(id: usize) -> String {
    format!("item_{id:05}")
}

pub fn export_corpus(items: &[CorpusItem], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for item in items {
        export_item(item, &dir.join(item_dir_name(item.id)))?;
    }
    Ok(())
}

/// Ingests every subdirectory of `dir` in name order; ids follow that order.
pub fn load_corpus_dir(dir: &Path, part_size: usize) -> Result<Vec<CorpusItem>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    subdirs
        .iter()
        .enumerate()
        .map(|(id, d)| {
            let mut item = ingest_item(d, part_size)?;
            item.id = id;
            Ok(item)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generator::{generate_figure, FigureSpec};
    use crate::figure::PART_SIZE;

    fn write_png(path: &Path, w: usize, h: usize, px: &[u8]) {
        fs::write(path, encode_png_gray(w, h, px).unwrap()).unwrap();
    }

    #[test]
    fn export_ingest_round_trip() {
        let spec = FigureSpec {
            jitter: 0.6,
            seed: 5,
            ..FigureSpec::default()
        };
        let item = generate_figure(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_item(&item, dir.path()).unwrap();
        let back = ingest_item(dir.path(), PART_SIZE).unwrap();
        assert_eq!(back.labels, item.labels);
        assert_eq!(back.sketch, item.sketch);
        assert_eq!(back.keypoints, item.keypoints);
        for (l, p) in &item.parts {
            assert_eq!(back.parts[l].sketch.bbox, p.sketch.bbox);
            assert!(back.parts[l].sketch.crop.max_abs_diff(&p.sketch.crop) <= 1e-6);
            assert_eq!(back.parts[l].mask, p.mask);
        }
        assert!(matches!(
            back.provenance,
            Provenance::Ingested {
                keypoints_extracted: false,
                ..
            }
        ));
    }

    #[test]
    fn missing_keypoints_are_extracted() {
        let item = generate_figure(&FigureSpec::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_item(&item, dir.path()).unwrap();
        fs::remove_file(dir.path().join(KEYPOINTS_FILE)).unwrap();
        let back = ingest_item(dir.path(), PART_SIZE).unwrap();
        assert!(matches!(
            back.provenance,
            Provenance::Ingested {
                keypoints_extracted: true,
                ..
            }
        ));
        assert_eq!(back.keypoints.len(), 8);
        assert!(back.keypoints.values().all(|k| k.is_complete()));
    }

    #[test]
    fn malformed_inputs_name_their_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(
            matches!(ingest_item(dir.path(), PART_SIZE), Err(Error::MissingFile(p)) if p.ends_with(SKETCH_FILE))
        );

        write_png(&dir.path().join(SKETCH_FILE), 4, 4, &[255; 16]);
        assert!(
            matches!(ingest_item(dir.path(), PART_SIZE), Err(Error::MissingFile(p)) if p.ends_with(LABELS_FILE))
        );

        let mut codes = vec![0u8; 16];
        codes[3] = 9;
        codes[7] = 9;
        codes[8] = 12;
        write_png(&dir.path().join(LABELS_FILE), 4, 4, &codes);
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::BadLabelCode { code: 9, count: 2 })
        ));

        write_png(&dir.path().join(LABELS_FILE), 4, 5, &[0; 20]);
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::SizeMismatch {
                sketch: (4, 4),
                labels: (4, 5)
            })
        ));

        write_png(&dir.path().join(LABELS_FILE), 4, 4, &[0; 16]);
        fs::write(
            dir.path().join(KEYPOINTS_FILE),
            r#"{"parts":[{"label":"Face","joints":{"LKnee":[1,2]}}]}"#,
        )
        .unwrap();
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::BadKeypoints(_))
        ));

        fs::write(dir.path().join(KEYPOINTS_FILE), "not json").unwrap();
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::BadKeypoints(_))
        ));

        fs::write(dir.path().join(SKETCH_FILE), b"garbage").unwrap();
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::Image(_))
        ));
    }

    #[test]
    fn rgb_labels_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join(SKETCH_FILE), 2, 2, &[255; 4]);
        let mut buf = Vec::new();
        image::ImageEncoder::write_image(
            image::codecs::png::PngEncoder::new(&mut buf),
            &[0u8; 12],
            2,
            2,
            image::ExtendedColorType::Rgb8,
        )
        .unwrap();
        fs::write(dir.path().join(LABELS_FILE), buf).unwrap();
        assert!(matches!(
            ingest_item(dir.path(), PART_SIZE),
            Err(Error::BadPixelFormat { .. })
        ));
    }

    #[test]
    fn keypoint_json_uses_point_pairs() {
        let kps = generate_figure(&FigureSpec::default()).unwrap().keypoints;
        let text = keypoints_to_json(&kps).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let first = &v["parts"][0];
        assert_eq!(first["label"], "Hair");
        assert!(first["joints"]["HeadTop"].as_array().unwrap().len() == 2);
        assert_eq!(keypoints_from_json(&text).unwrap(), kps);
    }
}
