//! Simulation, modelling and risk tooling for a small quantum credit-risk
//! workflow: Gaussian state loaders, a one-asset Gaussian conditional
//! independence (GCI) circuit, native-gate lowering and readout/phase noise.

pub mod circuits;
pub mod exec;
pub mod finmodel;
pub mod noise;
pub mod riskpipe;
pub mod simkit;
pub mod transpiler;
pub mod variational;
