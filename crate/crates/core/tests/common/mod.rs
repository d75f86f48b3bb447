#![allow(dead_code)]

pub mod corpus;
pub mod goldens;
pub mod props;
