use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::patch::{extract_patch, inscribed_radius_mm, Footprint};
use super::{Preprocessed, SampleKind, SampleLabel, SampleSpec, Scheme};
use crate::volio::{Geometry, KidneyComponent, LabelGrid, HU_CLIP, HU_SCALE, KIDNEY, TUMOUR};
use crate::{Error, Result};

/// Sampling and preprocessing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    pub spacing_mm: f64,
    pub hu_clip: (f32, f32),
    pub hu_scale: f32,
    pub mask_dilation_mm: f64,
    pub tile_step_mm: f64,
    pub block_step_mm: f64,
    pub sliding_spacing_mm: f64,
    pub cap_per_class: usize,
    /// Tumour discs strictly larger than this make a sample cancerous.
    pub cancer_radius_mm: f64,
    /// Kidney discs strictly larger than this make a sample normal kidney.
    pub kidney_radius_mm: f64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            spacing_mm: 1.0,
            hu_clip: HU_CLIP,
            hu_scale: HU_SCALE,
            mask_dilation_mm: 40.0,
            tile_step_mm: 1.0,
            block_step_mm: 5.0,
            sliding_spacing_mm: 40.0,
            cap_per_class: 50,
            cancer_radius_mm: 10.0,
            kidney_radius_mm: 20.0,
            seed: 11,
        }
    }
}

impl SamplerParams {
    fn step_slices(&self, kind: SampleKind, pitch: f64) -> usize {
        let mm = match kind {
            SampleKind::Tile => self.tile_step_mm,
            SampleKind::Block => self.block_step_mm,
        };
        ((mm / pitch).round() as usize).max(1)
    }
}

/// Slice indices of samples covering `lo..=hi`, centred within the span.
fn axial_positions(lo: usize, hi: usize, kind: SampleKind, step: usize) -> Vec<usize> {
    let n_slices = hi - lo + 1;
    if n_slices < kind.depth() {
        return vec![lo + (n_slices - 1) / 2];
    }
    let n = (n_slices - 1) / step + 1;
    let start = lo + ((n_slices - 1) - (n - 1) * step) / 2;
    (0..n).map(|k| start + k * step).collect()
}

/// One sample per axial step through the kidney, centred on its in-plane centroid.
///
/// With `require_kidney`, samples whose footprint holds no contour voxel are dropped.
pub fn centralised_samples(
    pre: &Preprocessed,
    kidney: &KidneyComponent,
    kind: SampleKind,
    ids: (&str, &str),
    params: &SamplerParams,
    require_kidney: bool,
) -> Result<Vec<SampleSpec>> {
    let g = *pre.labels.geometry();
    let (lo, hi) = kidney.bbox;
    let same_pitch =
        (0..3).all(|a| (kidney.mask.geometry().spacing[a] - g.spacing[a]).abs() < 1e-9);
    if !same_pitch || (0..3).any(|a| hi[a] >= g.dims[a]) {
        return Err(Error::Shape(
            "kidney component is not on the preprocessed lattice".into(),
        ));
    }
    let step = params.step_slices(kind, g.spacing[2]);
    let vx = g
        .to_voxel(kidney.centroid)
        .map(|c| c.round().max(0.0) as usize);
    let mut out = Vec::new();
    for z in axial_positions(lo[2], hi[2], kind, step) {
        let center = g.position(vx[0].min(g.dims[0] - 1), vx[1].min(g.dims[1] - 1), z);
        let fp = Footprint::new(&g, center, kind);
        if require_kidney && !contains_contour(&pre.labels, &fp) {
            continue;
        }
        let label = label_footprint(&pre.labels, &fp, params)?;
        out.push(SampleSpec {
            scan_id: ids.0.to_string(),
            kidney_id: ids.1.to_string(),
            kind,
            scheme: Scheme::Centralised,
            center,
            label,
        });
    }
    Ok(out)
}

fn contains_contour(labels: &LabelGrid, fp: &Footprint) -> bool {
    let Some((lo, hi)) = fp.clip(labels.geometry().dims) else {
        return false;
    };
    let g = labels.geometry();
    (lo[2]..hi[2]).any(|z| {
        (lo[1]..hi[1]).any(|y| {
            let s = g.index(lo[0], y, z);
            labels.grid().data()[s..s + hi[0] - lo[0]]
                .iter()
                .any(|&c| c != 0)
        })
    })
}

/// Label of a sample from the largest inscribed tumour and kidney discs over its slices.
pub fn label_sample(
    spec: &SampleSpec,
    labels: &LabelGrid,
    params: &SamplerParams,
) -> Result<SampleLabel> {
    label_footprint(labels, &Footprint::of(labels.geometry(), spec), params)
}

fn label_footprint(
    labels: &LabelGrid,
    fp: &Footprint,
    params: &SamplerParams,
) -> Result<SampleLabel> {
    let patch = extract_patch(labels.grid(), fp, 0u8);
    let pitch = labels.geometry().spacing[0];
    let [w, h, d] = patch.size;
    for (code, radius, label) in [
        (TUMOUR, params.cancer_radius_mm, SampleLabel::Cancerous),
        (KIDNEY, params.kidney_radius_mm, SampleLabel::NormalKidney),
    ] {
        // a disc of radius r covers at least pi r^2 pixels
        let min_pixels = (PI * (radius / pitch).powi(2)).floor() as usize;
        for z in 0..d {
            let slice = &patch.data[z * w * h..(z + 1) * w * h];
            let fg: Vec<bool> = slice.iter().map(|&c| c == code).collect();
            if fg.iter().filter(|&&b| b).count() < min_pixels {
                continue;
            }
            if inscribed_radius_mm(&fg, w, h, pitch)? > radius {
                return Ok(label);
            }
        }
    }
    Ok(SampleLabel::None)
}

/// Per-slice integral images of tumour and kidney voxel counts.
#[derive(Debug, Clone)]
pub struct ClassCounts {
    dims: [usize; 3],
    tumour: Vec<u32>,
    kidney: Vec<u32>,
}

impl ClassCounts {
    pub fn new(labels: &LabelGrid) -> Self {
        let g = labels.geometry();
        let [nx, ny, nz] = g.dims;
        let (w, h) = (nx + 1, ny + 1);
        let mut tumour = vec![0u32; w * h * nz];
        let mut kidney = vec![0u32; w * h * nz];
        for z in 0..nz {
            for y in 0..ny {
                let (mut rt, mut rk) = (0u32, 0u32);
                for x in 0..nx {
                    let c = labels.grid().get(x, y, z);
                    rt += u32::from(c == TUMOUR);
                    rk += u32::from(c == KIDNEY);
                    let i = (z * h + y + 1) * w + x + 1;
                    let up = (z * h + y) * w + x + 1;
                    tumour[i] = tumour[up] + rt;
                    kidney[i] = kidney[up] + rk;
                }
            }
        }
        Self {
            dims: g.dims,
            tumour,
            kidney,
        }
    }

    /// Voxels of `code` in slice `z` within the clipped in-plane footprint.
    pub fn count(&self, fp: &Footprint, z: usize, code: u8) -> u32 {
        let Some((lo, hi)) = fp.clip([self.dims[0], self.dims[1], self.dims[2]]) else {
            return 0;
        };
        let t = if code == TUMOUR {
            &self.tumour
        } else {
            &self.kidney
        };
        let (w, h) = (self.dims[0] + 1, self.dims[1] + 1);
        let at = |x: usize, y: usize| t[(z * h + y) * w + x];
        at(hi[0], hi[1]) + at(lo[0], lo[1]) - at(lo[0], hi[1]) - at(hi[0], lo[1])
    }

    /// True when no slice of `fp` holds enough tumour or kidney voxels for a positive label.
    fn surely_none(&self, fp: &Footprint, params: &SamplerParams, pitch: f64) -> bool {
        let Some((lo, hi)) = fp.clip(self.dims) else {
            return true;
        };
        let need_t = (PI * (params.cancer_radius_mm / pitch).powi(2)).floor() as u32;
        let need_k = (PI * (params.kidney_radius_mm / pitch).powi(2)).floor() as u32;
        (lo[2]..hi[2])
            .all(|z| self.count(fp, z, TUMOUR) < need_t && self.count(fp, z, KIDNEY) < need_k)
    }
}

/// In-plane offsets (mm from the outer face) of a centred grid with pitch `spacing`.
pub fn sliding_grid(extent_mm: f64, spacing_mm: f64) -> Vec<f64> {
    let n = ((extent_mm / spacing_mm + 1e-9).floor() as usize).max(1);
    let start = (extent_mm - (n - 1) as f64 * spacing_mm) / 2.0;
    (0..n).map(|k| start + k as f64 * spacing_mm).collect()
}

/// Grid samples across the whole scan, each assigned to the nearest kidney, capped per
/// kidney and class.
pub fn sliding_samples(
    pre: &Preprocessed,
    kidneys: &[(String, &KidneyComponent)],
    kind: SampleKind,
    scan_id: &str,
    params: &SamplerParams,
) -> Result<Vec<SampleSpec>> {
    if kidneys.is_empty() {
        return Err(Error::NoKidney);
    }
    let g: Geometry = *pre.labels.geometry();
    let counts = ClassCounts::new(&pre.labels);
    let extent = g.extent();
    let face = [0, 1].map(|a| g.origin[a] - g.spacing[a] / 2.0);
    let xs: Vec<f64> = sliding_grid(extent[0], params.sliding_spacing_mm)
        .iter()
        .map(|o| face[0] + o)
        .collect();
    let ys: Vec<f64> = sliding_grid(extent[1], params.sliding_spacing_mm)
        .iter()
        .map(|o| face[1] + o)
        .collect();
    let step = params.step_slices(kind, g.spacing[2]);
    let mut out = Vec::new();
    for z in axial_positions(0, g.dims[2] - 1, kind, step) {
        for &y in &ys {
            for &x in &xs {
                // snap to the voxel centre the footprint is built around
                let v = g.to_voxel([x, y, 0.0]).map(|c| c.round().max(0.0) as usize);
                let center = g.position(v[0].min(g.dims[0] - 1), v[1].min(g.dims[1] - 1), z);
                let fp = Footprint::new(&g, center, kind);
                let label = if counts.surely_none(&fp, params, g.spacing[0]) {
                    SampleLabel::None
                } else {
                    label_footprint(&pre.labels, &fp, params)?
                };
                let nearest = kidneys
                    .iter()
                    .map(|(id, k)| {
                        let d: f64 = (0..3).map(|a| (center[a] - k.centroid[a]).powi(2)).sum();
                        (d, id)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)))
                    .map(|(_, id)| id.clone())
                    .expect("at least one kidney");
                out.push(SampleSpec {
                    scan_id: scan_id.to_string(),
                    kidney_id: nearest,
                    kind,
                    scheme: Scheme::Sliding,
                    center,
                    label,
                });
            }
        }
    }
    Ok(cap_per_class(out, params.cap_per_class, params.seed))
}

/// Keeps at most `cap` samples per (kidney, label), chosen uniformly with `seed`; order kept.
pub fn cap_per_class(samples: Vec<SampleSpec>, cap: usize, seed: u64) -> Vec<SampleSpec> {
    let mut groups: BTreeMap<(String, SampleLabel), Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups
            .entry((s.kidney_id.clone(), s.label))
            .or_default()
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; samples.len()];
    for idx in groups.values() {
        if idx.len() <= cap {
            idx.iter().for_each(|&i| keep[i] = true);
        } else {
            for j in rand::seq::index::sample(&mut rng, idx.len(), cap) {
                keep[idx[j]] = true;
            }
        }
    }
    samples
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}
