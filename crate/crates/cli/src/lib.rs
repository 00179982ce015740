//! Command-line front end: configuration, presets and bit-stable outputs.

// `!(x > 0.0)` is the idiom here for rejecting NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
