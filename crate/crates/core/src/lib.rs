//! Harmonic-mode geometry augmentation for scarce-data regression of
//! membrane properties, with a from-scratch MLP and classical baselines.

pub mod baselines;
pub mod chemio;
pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod featurize;
pub mod fixtures;
pub mod fsutil;
pub mod metrics;
pub mod neuralnet;
pub mod persist;
pub mod rng;
pub mod vibration;
