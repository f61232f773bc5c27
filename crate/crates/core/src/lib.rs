//! Gradient-informed slicing of implicit multi-material designs.

pub mod arrangement;
pub mod contour;
pub mod design;
pub mod expr;
pub mod fixtures;
pub mod geom;
pub mod job;
pub mod mesh;
pub mod palette;
pub mod profile;
pub mod simulator;
pub mod gcode;
pub mod strategy;
pub mod svg;
pub mod toolpath;
