//! Face image classification from block texture descriptors.
//!
//! An image is cut into a 3×3 grid; each block is summarized by six
//! texture descriptors, quantized with a shared k-means codebook into a
//! nine-symbol label vector, and classified by one of five discrete
//! Bayesian-network classifiers (naive Bayes, TAN and FAN with a global
//! structure, and per-class TAN/FAN multinets). Tangent-space augmentation
//! can enlarge the training set with small synthetic transformations.

pub mod bayesnet;
pub mod classifiers;
pub mod evaluation;
pub mod features;
pub mod imaging;
pub mod pipeline;
pub mod quantizer;
pub mod tangent;
mod textio;
