#![allow(dead_code)]

pub mod quotient;
