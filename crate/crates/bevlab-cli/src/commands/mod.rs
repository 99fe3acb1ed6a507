//! One module per subcommand.

pub mod bev_gt;
pub mod depth_gt;
pub mod dynamic_mask;
pub mod eval_ssc;
pub mod eval_unsup;
pub mod lift_masks;
pub mod loss_check;
pub mod render;
pub mod splat;
pub mod static_map;
pub mod synth;
