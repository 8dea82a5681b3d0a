//! Conditioning images for the position- and movement-conditioned image
//! models, plus training pairs cut from annotated real videos.

pub mod color;
pub mod draw;
pub mod maps;
pub mod pairs;

pub use color::{mitosis_color, MitosisPhase};
pub use maps::{
    correspondences, render_conditioning, render_detection_labels, render_movement_map,
    render_position_map, render_position_maps, ConditioningSet, Correspondence, RenderParams,
};
pub use pairs::{
    augment_pair, build_training_pairs, AnnotatedVideo, AugmentMode, PairKind, TrainingPair,
};
