#![allow(dead_code)]

pub mod eval;
pub mod images;
pub mod oracles;
pub mod scenes;
