//! Contextual semantic relevance of objects in captioned scenes.
//!
//! Vision metrics compare object crops with the whole image and with
//! neighbouring crops; language metrics compare object names with caption
//! sentences and neighbouring names. Spectral-residual saliency and box
//! geometry supply the control predictors, and [`gam`] scores each metric's
//! value for predicting fixations by ΔAIC against a base model.

pub mod bundle;
pub mod fmt;
pub mod gam;
pub mod geometry;
pub mod lexicon;
pub mod relevance;
pub mod saliency;
pub mod sim;
pub mod tables;
pub mod vecmath;
