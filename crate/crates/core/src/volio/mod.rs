//! Voxel grids and the volumetric operations that feed every later stage.

mod grid;
mod io;
mod kidneys;
mod morph;
mod resample;

pub use grid::{Geometry, Grid, LabelGrid, Mask, VolumeGrid, BACKGROUND, CYST, KIDNEY, TUMOUR};
pub(crate) use io::write_atomic;
pub use io::{load_grid, save_labels, save_mask, save_volume, GridFile, GridHeader, GridKind};
pub use kidneys::{split_kidneys, KidneyComponent, Side, MIN_COMPONENT_MM3};
pub use morph::{
    components_26, dilate, squared_distance_to_foreground, squared_distance_to_foreground_2d,
};
pub use resample::{resample, Interp, Resample};

/// Lower and upper clip bounds in HU before division by [`HU_SCALE`].
pub const HU_CLIP: (f32, f32) = (-200.0, 200.0);
/// Divisor applied after clipping.
pub const HU_SCALE: f32 = 100.0;

/// Clips to [`HU_CLIP`] and divides by [`HU_SCALE`]; refuses a volume that is already normalized.
pub fn clip_normalize(volume: &VolumeGrid) -> crate::Result<VolumeGrid> {
    clip_normalize_with(volume, HU_CLIP, HU_SCALE)
}

pub fn clip_normalize_with(
    volume: &VolumeGrid,
    clip: (f32, f32),
    scale: f32,
) -> crate::Result<VolumeGrid> {
    if volume.normalized {
        return Err(crate::Error::AlreadyNormalized);
    }
    let grid = volume.grid.map(|v| v.clamp(clip.0, clip.1) / scale);
    Ok(VolumeGrid {
        grid,
        normalized: true,
    })
}
