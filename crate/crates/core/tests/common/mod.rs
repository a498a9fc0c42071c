#![allow(dead_code)]

pub mod latex;
pub mod mock;
pub mod synth;
pub mod checks;
pub mod pipeline;
