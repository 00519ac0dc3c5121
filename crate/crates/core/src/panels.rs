//! Panel segmentation and recomposition.
//!
//! Comics are grids separated by light gutters. Detection runs projection
//! profiles: a gutter is a run of at least `gutter_min_px` consecutive rows
//! (or columns) whose mean luma is at or above the threshold. Cells are the
//! complementary intervals; near-uniform cells are suppressed as blank
//! fillers. Free-form, non-grid layouts are out of scope — runs on real
//! comics that defeat profiling should pass `declared_grid` hints or record
//! the failure.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ComicArtifact, GridLayout, Panel, Provenance, ReadingOrder, Rect};

/// Luma threshold above which a projection row/column counts as gutter.
pub const DEFAULT_GUTTER_LUMA_THRESHOLD: u8 = 235;
/// Minimum gutter thickness in pixels.
pub const DEFAULT_GUTTER_MIN_PX: u32 = 3;
/// Cells with pixel-luma variance below this floor are blank fillers.
const BLANK_VARIANCE_FLOOR: f64 = 1.0;
/// Fill color for gutters and padding when composing.
const GUTTER_FILL: Rgb<u8> = Rgb([255, 255, 255]);

/// Tuning knobs for segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationHints {
    /// Expected (rows, cols); detection must agree or segmentation errors.
    pub declared_grid: Option<(u32, u32)>,
    pub gutter_min_px: u32,
    pub gutter_luma_threshold: u8,
    pub order: ReadingOrder,
}

impl Default for SegmentationHints {
    fn default() -> Self {
        SegmentationHints {
            declared_grid: None,
            gutter_min_px: DEFAULT_GUTTER_MIN_PX,
            gutter_luma_threshold: DEFAULT_GUTTER_LUMA_THRESHOLD,
            order: ReadingOrder::RowMajor,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("declared grid {declared:?} does not match detected {detected:?}")]
    GridMismatch {
        declared: (u32, u32),
        detected: (u32, u32),
    },
    #[error("degenerate image: {0}")]
    DegenerateImage(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("cannot compose an empty panel list")]
    EmptyPanels,
    #[error("{count} panels exceed layout capacity {capacity}")]
    CapacityExceeded { count: usize, capacity: usize },
}

fn luma(px: &Rgb<u8>) -> f64 {
    0.299 * px.0[0] as f64 + 0.587 * px.0[1] as f64 + 0.114 * px.0[2] as f64
}

/// Mean luma per row and per column.
fn projection_profiles(image: &RgbImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = image.dimensions();
    let mut rows = vec![0.0f64; h as usize];
    let mut cols = vec![0.0f64; w as usize];
    for (x, y, px) in image.enumerate_pixels() {
        let l = luma(px);
        rows[y as usize] += l;
        cols[x as usize] += l;
    }
    for r in rows.iter_mut() {
        *r /= w as f64;
    }
    for c in cols.iter_mut() {
        *c /= h as f64;
    }
    (rows, cols)
}

/// Maximal intervals of non-gutter positions. A gutter is a run of at least
/// `min_run` positions whose profile value is >= threshold.
fn content_intervals(profile: &[f64], threshold: f64, min_run: u32) -> Vec<(u32, u32)> {
    let is_gutterish: Vec<bool> = profile.iter().map(|&v| v >= threshold).collect();
    // runs shorter than min_run are content, not gutters
    let mut gutter = vec![false; profile.len()];
    let mut i = 0;
    while i < is_gutterish.len() {
        if is_gutterish[i] {
            let start = i;
            while i < is_gutterish.len() && is_gutterish[i] {
                i += 1;
            }
            if (i - start) as u32 >= min_run {
                for g in gutter.iter_mut().take(i).skip(start) {
                    *g = true;
                }
            }
        } else {
            i += 1;
        }
    }
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < gutter.len() {
        if !gutter[i] {
            let start = i;
            while i < gutter.len() && !gutter[i] {
                i += 1;
            }
            intervals.push((start as u32, (i - start) as u32));
        } else {
            i += 1;
        }
    }
    intervals
}

fn cell_variance(image: &RgbImage, rect: &Rect) -> f64 {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let n = (rect.w as f64) * (rect.h as f64);
    for y in rect.y..rect.bottom() {
        for x in rect.x..rect.right() {
            let l = luma(image.get_pixel(x, y));
            sum += l;
            sum_sq += l * l;
        }
    }
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

fn crop(image: &RgbImage, rect: &Rect) -> RgbImage {
    let mut out = RgbImage::new(rect.w, rect.h);
    for y in 0..rect.h {
        for x in 0..rect.w {
            out.put_pixel(x, y, *image.get_pixel(rect.x + x, rect.y + y));
        }
    }
    out
}

/// Segment a composite into ordered panels.
///
/// Panels come back row-major, top-left to bottom-right, bboxes excluding
/// gutters. Provenance on the returned artifact is empty; callers that know
/// where the composite came from fill it in.
pub fn segment(
    composite: &RgbImage,
    hints: &SegmentationHints,
) -> Result<ComicArtifact, SegmentError> {
    let (w, h) = composite.dimensions();
    if w == 0 || h == 0 {
        return Err(SegmentError::DegenerateImage("zero-size image".into()));
    }
    let threshold = hints.gutter_luma_threshold as f64;
    let (row_profile, col_profile) = projection_profiles(composite);
    let row_intervals = content_intervals(&row_profile, threshold, hints.gutter_min_px);
    let col_intervals = content_intervals(&col_profile, threshold, hints.gutter_min_px);

    if row_intervals.is_empty() || col_intervals.is_empty() {
        return Err(SegmentError::DegenerateImage(
            "no content intervals (all gutter)".into(),
        ));
    }

    let detected = (row_intervals.len() as u32, col_intervals.len() as u32);
    if let Some(declared) = hints.declared_grid {
        if detected != declared {
            return Err(SegmentError::GridMismatch { declared, detected });
        }
    }

    let mut panels = Vec::new();
    for &(y, cell_h) in &row_intervals {
        for &(x, cell_w) in &col_intervals {
            let bbox = Rect { x, y, w: cell_w, h: cell_h };
            if cell_variance(composite, &bbox) < BLANK_VARIANCE_FLOOR {
                continue;
            }
            panels.push(Panel {
                image: crop(composite, &bbox),
                index: panels.len() + 1,
                bbox,
            });
        }
    }
    if panels.is_empty() {
        return Err(SegmentError::DegenerateImage(
            "every detected cell is blank".into(),
        ));
    }

    let gutter_px = estimate_gutter(&row_intervals, &col_intervals, w, h);
    Ok(ComicArtifact {
        composite: composite.clone(),
        panel_count: panels.len(),
        panels,
        layout: GridLayout::new(detected.0, detected.1, gutter_px),
        provenance: Provenance::default(),
    })
}

fn estimate_gutter(rows: &[(u32, u32)], cols: &[(u32, u32)], _w: u32, _h: u32) -> u32 {
    let mut gaps = Vec::new();
    for pair in rows.windows(2) {
        gaps.push(pair[1].0 - (pair[0].0 + pair[0].1));
    }
    for pair in cols.windows(2) {
        gaps.push(pair[1].0 - (pair[0].0 + pair[0].1));
    }
    gaps.into_iter().min().unwrap_or(0)
}

/// Number of panels the segmenter finds in a composite.
pub fn count_panels(
    composite: &RgbImage,
    hints: &SegmentationHints,
) -> Result<usize, SegmentError> {
    Ok(segment(composite, hints)?.panels.len())
}

/// Place panel images row-major on a grid with uniform gutters (including a
/// gutter-wide outer border), returning the full artifact with placement
/// bboxes. Smaller panels are centered in their cell; unused trailing cells
/// stay blank and are suppressed on re-segmentation.
pub fn compose_artifact(
    images: Vec<RgbImage>,
    layout: GridLayout,
    provenance: Provenance,
) -> Result<ComicArtifact, ComposeError> {
    if images.is_empty() {
        return Err(ComposeError::EmptyPanels);
    }
    if images.len() > layout.capacity() {
        return Err(ComposeError::CapacityExceeded {
            count: images.len(),
            capacity: layout.capacity(),
        });
    }
    let cell_w = images.iter().map(|i| i.width()).max().unwrap();
    let cell_h = images.iter().map(|i| i.height()).max().unwrap();
    let g = layout.gutter_px;
    let total_w = layout.cols * cell_w + (layout.cols + 1) * g;
    let total_h = layout.rows * cell_h + (layout.rows + 1) * g;
    let mut composite = RgbImage::from_pixel(total_w, total_h, GUTTER_FILL);

    let mut panels = Vec::new();
    for (idx, img) in images.into_iter().enumerate() {
        let row = idx as u32 / layout.cols;
        let col = idx as u32 % layout.cols;
        let cx = g + col * (cell_w + g) + (cell_w - img.width()) / 2;
        let cy = g + row * (cell_h + g) + (cell_h - img.height()) / 2;
        for (x, y, px) in img.enumerate_pixels() {
            composite.put_pixel(cx + x, cy + y, *px);
        }
        panels.push(Panel {
            bbox: Rect { x: cx, y: cy, w: img.width(), h: img.height() },
            image: img,
            index: idx + 1,
        });
    }

    Ok(ComicArtifact {
        composite,
        panel_count: panels.len(),
        panels,
        layout,
        provenance,
    })
}

/// Compose panel images into a composite raster (the panel-placement
/// artifact is discarded; see [`compose_artifact`] for the full result).
pub fn compose(panels: &[Panel], layout: &GridLayout) -> Result<RgbImage, ComposeError> {
    let images: Vec<RgbImage> = panels.iter().map(|p| p.image.clone()).collect();
    Ok(compose_artifact(images, *layout, Provenance::default())?.composite)
}

/// Deterministic synthetic composite: a rows x cols grid of solid-color
/// panels with the given cell size and gutter. Used by tests and mock
/// providers for desk-scale runs.
pub fn render_grid_fixture(
    rows: u32,
    cols: u32,
    cell_w: u32,
    cell_h: u32,
    gutter: u32,
    seed: u64,
) -> RgbImage {
    let palette = [
        [180, 60, 60],
        [60, 140, 70],
        [60, 80, 170],
        [160, 120, 40],
        [120, 60, 150],
        [40, 130, 130],
        [150, 90, 90],
        [90, 110, 50],
        [70, 70, 110],
    ];
    let images: Vec<RgbImage> = (0..rows * cols)
        .map(|i| {
            let c = palette[((seed as usize) + i as usize) % palette.len()];
            let mut img = RgbImage::from_pixel(cell_w, cell_h, Rgb(c));
            // one darker marker pixel per panel keeps cells distinguishable
            let mx = (i % cell_w.max(1)) % cell_w;
            img.put_pixel(mx, cell_h / 2, Rgb([20, 20, 20]));
            img
        })
        .collect();
    compose_artifact(images, GridLayout::new(rows, cols, gutter), Provenance::default())
        .expect("fixture grid composes")
        .composite
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::image_digest;

    fn hints_for_gutter(g: u32) -> SegmentationHints {
        SegmentationHints {
            gutter_min_px: g.clamp(1, DEFAULT_GUTTER_MIN_PX),
            ..SegmentationHints::default()
        }
    }

    #[test]
    fn two_by_two_grid_segments_in_reading_order() {
        let composite = render_grid_fixture(2, 2, 40, 30, 4, 0);
        let artifact = segment(&composite, &SegmentationHints::default()).unwrap();
        assert_eq!(artifact.panel_count, 4);
        // row-major: TL, TR, BL, BR
        assert!(artifact.panels[0].bbox.y == artifact.panels[1].bbox.y);
        assert!(artifact.panels[0].bbox.x < artifact.panels[1].bbox.x);
        assert!(artifact.panels[2].bbox.y > artifact.panels[0].bbox.y);
        assert!(crate::domain::validate_artifact(&artifact).is_ok());
    }

    #[test]
    fn borderless_image_is_one_panel() {
        let img = RgbImage::from_pixel(64, 48, Rgb([90, 90, 120]));
        let artifact = segment(&img, &SegmentationHints::default()).unwrap();
        assert_eq!(artifact.panel_count, 1);
        assert_eq!(artifact.panels[0].bbox, Rect { x: 0, y: 0, w: 64, h: 48 });
    }

    #[test]
    fn two_by_three_grid_counts_six() {
        let composite = render_grid_fixture(2, 3, 32, 24, 4, 2);
        assert_eq!(count_panels(&composite, &SegmentationHints::default()).unwrap(), 6);
    }

    #[test]
    fn declared_grid_mismatch_errors() {
        let composite = render_grid_fixture(2, 2, 40, 30, 4, 0);
        let hints = SegmentationHints {
            declared_grid: Some((3, 3)),
            ..SegmentationHints::default()
        };
        assert!(matches!(
            segment(&composite, &hints),
            Err(SegmentError::GridMismatch { .. })
        ));
    }

    #[test]
    fn all_white_image_is_degenerate() {
        let img = RgbImage::from_pixel(64, 64, GUTTER_FILL);
        assert!(matches!(
            segment(&img, &SegmentationHints::default()),
            Err(SegmentError::DegenerateImage(_))
        ));
    }

    #[test]
    fn compose_then_segment_recovers_panel_digests() {
        for (rows, cols) in [(1, 1), (2, 2), (2, 3), (3, 3)] {
            for gutter in [2u32, 4, 8] {
                let images: Vec<RgbImage> = (0..rows * cols)
                    .map(|i| {
                        RgbImage::from_pixel(30, 22, Rgb([40 + 17 * i as u8, 70, 90]))
                    })
                    .collect();
                let digests: Vec<_> = images.iter().map(image_digest).collect();
                let artifact = compose_artifact(
                    images,
                    GridLayout::new(rows, cols, gutter),
                    Provenance::default(),
                )
                .unwrap();
                let reseg = segment(&artifact.composite, &hints_for_gutter(gutter)).unwrap();
                assert_eq!(reseg.panel_count, (rows * cols) as usize, "{rows}x{cols} g{gutter}");
                assert_eq!(reseg.panel_digests(), digests, "{rows}x{cols} g{gutter}");
            }
        }
    }

    #[test]
    fn partial_grid_suppresses_blank_filler() {
        let images: Vec<RgbImage> = (0..3)
            .map(|i| RgbImage::from_pixel(20, 20, Rgb([50 + 40 * i as u8, 60, 80])))
            .collect();
        let artifact =
            compose_artifact(images, GridLayout::new(2, 2, 4), Provenance::default()).unwrap();
        let reseg = segment(&artifact.composite, &SegmentationHints::default()).unwrap();
        assert_eq!(reseg.panel_count, 3);
    }

    #[test]
    fn single_panel_composes_with_border() {
        let img = RgbImage::from_pixel(20, 20, Rgb([50, 60, 80]));
        let artifact = compose_artifact(
            vec![img.clone()],
            GridLayout::new(1, 1, 4),
            Provenance::default(),
        )
        .unwrap();
        assert_eq!(artifact.composite.dimensions(), (28, 28));
        let reseg = segment(&artifact.composite, &SegmentationHints::default()).unwrap();
        assert_eq!(reseg.panels[0].digest(), image_digest(&img));
    }

    #[test]
    fn empty_panel_list_is_rejected() {
        assert!(matches!(
            compose_artifact(vec![], GridLayout::new(1, 1, 4), Provenance::default()),
            Err(ComposeError::EmptyPanels)
        ));
    }
}
