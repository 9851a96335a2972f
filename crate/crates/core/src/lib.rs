//! Multi-source issue assignment.
//!
//! Reports are triaged to development teams from two sources of text: the
//! summary and description written by the reporter, and text recognized in
//! screenshot attachments. Each source is a channel with its own tf-idf
//! statistics; channel vectors are concatenated and classified by
//! one-vs-rest linear SVMs. A hybrid router sends reports with screenshots
//! to the two-channel model and the rest to a text-only model.
//!
//! The crate also carries the evaluation protocol (repeated holdout,
//! weighted metrics, Wilcoxon rank-sum tests, timing), an accuracy monitor
//! based on change-point detection, a small HTTP assignment service and the
//! `triage` command line.

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod models;
pub mod monitor;
pub mod ocr;
pub mod service;
pub mod textprep;
pub mod util;
pub mod vectorizer;
