//! Orthogonal bubble decomposition, parameter tracking along trajectories,
//! and bubble-tree extraction from multi-bubble fields.

mod fit;
mod sampler;
mod track;
mod tree;

pub use fit::{
    default_mode, fit_orthogonal, orthogonality_cutoff, orthogonality_residuals, AnnulusNorm, DecompositionResult,
    FitMode, FitOptions, DEFAULT_K, DEFAULT_TOL_ORTH,
};
pub use sampler::{AffineView, BubbleField, FieldSampler, FnSampler, Provenance, RadialSampler};
pub use track::{track_parameters, Bound, ParameterTrack, TrackEntry, TrackOptions, Violation};
pub use tree::{bubble_tree, default_c2, quantized_energy, BubbleTree, Domain, TreeNode, TreeOptions};
