//! Privacy-preserving navigation: fixed-point ring arithmetic, additive and
//! XOR secret sharing, a trusted dealer, an in-process multi-party engine,
//! small neural networks, a grid world with rendered views, and the
//! evaluation harness tying them together.

pub mod dealer;
pub mod eval;
pub mod mpc;
pub mod nn;
pub mod pipeline;
pub mod ring;
pub mod rng;
pub mod sharing;
pub mod wire;
pub mod world;

pub type Tensor64 = nn::Tensor<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Model64 = nn::Sequential<f64>;
pub type Model32 = nn::Sequential<f32>;
