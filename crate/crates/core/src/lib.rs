//! Return-time statistics for skew products `F(x, y) = (f x, g^{h(x)} y)`
//! over subshifts of finite type, together with samplers and moment formulas
//! for their limiting point processes.

pub mod cocycle;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod limit;
pub mod moments;
pub mod par;
pub mod stats;
pub mod symbolic;

pub use error::{Error, Result};
