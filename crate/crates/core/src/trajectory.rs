//! Time-indexed sequences of fields.
//!
//! State and adjoint trajectories support stride (checkpoint) storage: frames
//! are kept at every `stride`-th level plus the final level, and intermediate
//! frames are recomputed on demand by the adjoint sweep. Control and gradient
//! trajectories are dense (one frame per level), since those are the
//! optimization variables. Per-level spatial integrals of the state are
//! always recorded densely, so cost evaluation and mass diagnostics never
//! depend on the frame stride.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundles::{AdjointField, ControlField, GradientField, StateField, TangentField};
use crate::error::{CoreError, Result};
use crate::grid::{Grid, TimeGrid};
use crate::model::{ModelParams, N_SPECIES};

/// Frame storage at every `stride`-th level plus the final one.
#[derive(Debug, Clone)]
pub(crate) struct StridedFrames<F> {
    stride: usize,
    levels: Vec<usize>,
    frames: Vec<F>,
}

impl<F> StridedFrames<F> {
    fn new(stride: usize) -> Self {
        assert!(stride >= 1, "frame stride must be >= 1");
        Self {
            stride,
            levels: Vec::new(),
            frames: Vec::new(),
        }
    }

    fn is_stored_level(&self, level: usize, n_steps: usize) -> bool {
        level % self.stride == 0 || level == n_steps
    }

    fn push(&mut self, level: usize, frame: F) {
        debug_assert!(self.levels.last().is_none_or(|&l| l < level));
        self.levels.push(level);
        self.frames.push(frame);
    }

    fn get(&self, level: usize) -> Option<&F> {
        self.levels
            .binary_search(&level)
            .ok()
            .map(|k| &self.frames[k])
    }
}

/// Forward state trajectory with per-level integrals and stride storage.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    time: TimeGrid,
    storage: StridedFrames<StateField>,
    integrals: Vec<[f64; N_SPECIES]>,
    min_value: f64,
}

impl StateTrajectory {
    pub(crate) fn with_capacity(time: TimeGrid, stride: usize) -> Self {
        Self {
            time,
            storage: StridedFrames::new(stride),
            integrals: Vec::with_capacity(time.n_levels()),
            min_value: f64::INFINITY,
        }
    }

    pub(crate) fn record(&mut self, level: usize, frame: &StateField) {
        debug_assert_eq!(self.integrals.len(), level);
        self.integrals.push(frame.integrals());
        self.min_value = self.min_value.min(frame.min_value());
        if self.storage.is_stored_level(level, self.time.n_steps()) {
            self.storage.push(level, frame.clone());
        }
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> Grid {
        self.storage.frames[0].grid()
    }

    pub fn stride(&self) -> usize {
        self.storage.stride
    }

    pub fn is_dense(&self) -> bool {
        self.storage.stride == 1
    }

    /// Frame at a time level, if stored.
    pub fn frame_at(&self, level: usize) -> Option<&StateField> {
        self.storage.get(level)
    }

    pub fn initial(&self) -> &StateField {
        &self.storage.frames[0]
    }

    pub fn final_frame(&self) -> &StateField {
        self.storage
            .frames
            .last()
            .expect("trajectory holds at least the initial frame")
    }

    /// Stored `(level, frame)` pairs in time order.
    pub fn stored(&self) -> impl Iterator<Item = (usize, &StateField)> {
        self.storage
            .levels
            .iter()
            .copied()
            .zip(self.storage.frames.iter())
    }

    /// Spatial integrals of the six species at each level (dense).
    pub fn integrals(&self) -> &[[f64; N_SPECIES]] {
        &self.integrals
    }

    /// Total mass at a level.
    pub fn mass(&self, level: usize) -> f64 {
        self.integrals[level].iter().sum()
    }

    /// Minimum value seen over all frames, species, and cells (including
    /// frames that were not stored).
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

}

/// Adjoint trajectory; same stride convention as the forward trajectory.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    time: TimeGrid,
    storage: StridedFrames<AdjointField>,
}

impl AdjointTrajectory {
    pub(crate) fn with_capacity(time: TimeGrid, stride: usize) -> Self {
        Self {
            time,
            storage: StridedFrames::new(stride),
        }
    }

    /// Record during the backward sweep; levels arrive in decreasing order and
    /// are reversed when the sweep completes.
    pub(crate) fn record_backward(&mut self, level: usize, frame: &AdjointField) {
        if self.storage.is_stored_level(level, self.time.n_steps()) {
            self.storage.levels.push(level);
            self.storage.frames.push(frame.clone());
        }
    }

    pub(crate) fn finish_backward(&mut self) {
        self.storage.levels.reverse();
        self.storage.frames.reverse();
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn stride(&self) -> usize {
        self.storage.stride
    }

    pub fn is_dense(&self) -> bool {
        self.storage.stride == 1
    }

    pub fn frame_at(&self, level: usize) -> Option<&AdjointField> {
        self.storage.get(level)
    }

    pub fn terminal(&self) -> &AdjointField {
        self.storage
            .frames
            .last()
            .expect("adjoint trajectory holds the terminal frame")
    }

    pub fn stored(&self) -> impl Iterator<Item = (usize, &AdjointField)> {
        self.storage
            .levels
            .iter()
            .copied()
            .zip(self.storage.frames.iter())
    }
}

/// Control trajectory: dense frames, or a single frame replicated across all
/// levels for constant-in-time controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    time: TimeGrid,
    storage: ControlStorage,
}

#[derive(Debug, Clone, PartialEq)]
enum ControlStorage {
    Dense(Vec<ControlField>),
    Constant(ControlField),
}

impl ControlTrajectory {
    /// Constant-in-time control maps.
    pub fn constant(grid: Grid, time: TimeGrid, alpha: f64, mu: f64, nu: f64) -> Self {
        Self {
            time,
            storage: ControlStorage::Constant(ControlField::constant(grid, alpha, mu, nu)),
        }
    }

    /// The uncontrolled reference: `alpha = alpha_lower`, `mu = nu = 0`.
    pub fn uncontrolled(grid: Grid, time: TimeGrid, p: &ModelParams) -> Self {
        Self::constant(grid, time, p.alpha_lower, 0.0, 0.0)
    }

    /// Box midpoints, constant in space and time.
    pub fn midpoint(grid: Grid, time: TimeGrid, p: &ModelParams) -> Self {
        let [(al, au), (ml, mu), (nl, nu)] = p.control_bounds();
        Self::constant(
            grid,
            time,
            0.5 * (al + au),
            0.5 * (ml + mu),
            0.5 * (nl + nu),
        )
    }

    /// I.i.d. uniform samples over the admissible box, seeded; sampling order
    /// is level, then component, then row-major cell, so equal seeds yield
    /// bitwise-identical trajectories.
    pub fn random_in_box(grid: Grid, time: TimeGrid, p: &ModelParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = p.control_bounds();
        let frames = (0..time.n_levels())
            .map(|_| {
                let mut f = ControlField::zeros(grid);
                for (k, (lo, hi)) in bounds.iter().enumerate() {
                    for v in f.component_mut(k).as_mut_slice() {
                        *v = rng.random_range(*lo..=*hi);
                    }
                }
                f
            })
            .collect();
        Self {
            time,
            storage: ControlStorage::Dense(frames),
        }
    }

    pub fn from_frames(time: TimeGrid, frames: Vec<ControlField>) -> Result<Self> {
        if frames.len() != time.n_levels() {
            return Err(CoreError::MisalignedTrajectories(format!(
                "control trajectory has {} frames for {} levels",
                frames.len(),
                time.n_levels()
            )));
        }
        Ok(Self {
            time,
            storage: ControlStorage::Dense(frames),
        })
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn grid(&self) -> Grid {
        match &self.storage {
            ControlStorage::Dense(frames) => frames[0].grid(),
            ControlStorage::Constant(f) => f.grid(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, ControlStorage::Dense(_))
    }

    pub fn frame(&self, level: usize) -> &ControlField {
        match &self.storage {
            ControlStorage::Dense(frames) => &frames[level],
            ControlStorage::Constant(f) => {
                debug_assert!(level < self.time.n_levels());
                f
            }
        }
    }

    /// Materializes dense per-level frames (no-op when already dense).
    pub fn to_dense(&self) -> Self {
        match &self.storage {
            ControlStorage::Dense(_) => self.clone(),
            ControlStorage::Constant(f) => Self {
                time: self.time,
                storage: ControlStorage::Dense(vec![f.clone(); self.time.n_levels()]),
            },
        }
    }

    /// Applies `f` to every distinct stored frame (the single underlying
    /// frame for constant storage).
    pub fn for_each_frame_mut(&mut self, mut f: impl FnMut(&mut ControlField)) {
        match &mut self.storage {
            ControlStorage::Dense(frames) => frames.iter_mut().for_each(&mut f),
            ControlStorage::Constant(frame) => f(frame),
        }
    }

    pub fn frames_mut(&mut self) -> &mut Vec<ControlField> {
        if let ControlStorage::Constant(_) = self.storage {
            *self = self.to_dense();
        }
        match &mut self.storage {
            ControlStorage::Dense(frames) => frames,
            ControlStorage::Constant(_) => unreachable!(),
        }
    }

    /// Exact box-membership check over every frame.
    pub fn check_in_box(&self, p: &ModelParams) -> Result<()> {
        let ok = match &self.storage {
            ControlStorage::Dense(frames) => frames.iter().all(|f| f.in_box(p)),
            ControlStorage::Constant(f) => f.in_box(p),
        };
        if ok {
            Ok(())
        } else {
            Err(CoreError::InfeasiblePerturbation(
                "control trajectory leaves the admissible box".into(),
            ))
        }
    }

    /// Sup-norm distance over all levels, components, and cells.
    pub fn sup_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.time, other.time);
        (0..self.time.n_levels())
            .map(|l| self.frame(l).sup_diff(other.frame(l)))
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_aligned(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.time != *other {
            return Err(CoreError::MisalignedTrajectories(format!(
                "{what}: time grids differ"
            )));
        }
        Ok(())
    }
}

/// Dense per-level gradient densities.
#[derive(Debug, Clone)]
pub struct GradientTrajectory {
    time: TimeGrid,
    frames: Vec<GradientField>,
}

impl GradientTrajectory {
    pub(crate) fn new(time: TimeGrid, frames: Vec<GradientField>) -> Self {
        debug_assert_eq!(frames.len(), time.n_levels());
        Self { time, frames }
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn frame(&self, level: usize) -> &GradientField {
        &self.frames[level]
    }

    pub fn frames(&self) -> &[GradientField] {
        &self.frames
    }
}

/// Dense tangent (linearized state) trajectory.
#[derive(Debug, Clone)]
pub struct TangentTrajectory {
    time: TimeGrid,
    frames: Vec<TangentField>,
}

impl TangentTrajectory {
    pub(crate) fn new(time: TimeGrid, frames: Vec<TangentField>) -> Self {
        debug_assert_eq!(frames.len(), time.n_levels());
        Self { time, frames }
    }

    pub fn time(&self) -> TimeGrid {
        self.time
    }

    pub fn frame(&self, level: usize) -> &TangentField {
        &self.frames[level]
    }

    pub fn frames(&self) -> &[TangentField] {
        &self.frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_controls_replicate_frames() {
        let grid = Grid::default_square(4).unwrap();
        let time = TimeGrid::new(1.0, 10).unwrap();
        let u = ControlTrajectory::constant(grid, time, 0.1, 0.0, 0.0);
        assert!(!u.is_dense());
        assert_eq!(u.frame(0), u.frame(10));
        let dense = u.to_dense();
        assert!(dense.is_dense());
        assert_eq!(dense.frame(3), u.frame(3));
    }

    #[test]
    fn random_controls_deterministic_and_feasible() {
        let grid = Grid::default_square(4).unwrap();
        let time = TimeGrid::new(1.0, 5).unwrap();
        let p = ModelParams::baseline(grid);
        let a = ControlTrajectory::random_in_box(grid, time, &p, 7);
        let b = ControlTrajectory::random_in_box(grid, time, &p, 7);
        assert_eq!(a, b);
        assert!(a.check_in_box(&p).is_ok());
        let c = ControlTrajectory::random_in_box(grid, time, &p, 8);
        assert!(a.sup_diff(&c) > 0.0);
    }
}
