//! Lexical-matching diagnostics for retrieval systems.
//!
//! For every query term, the toolkit compares the Robertson–Sparck Jones
//! weight estimated from judged relevant documents (user relevance) with the
//! weight estimated from a system's top-K results (system relevance). The
//! difference, ΔRSJ, is positive when a system retrieves documents containing
//! the term more than the judgments warrant and negative when it retrieves
//! them less.
//!
//! Modules follow the pipeline: [`textproc`] and [`corpus_index`] build
//! collection statistics, [`trec_io`] reads runs and judgments, [`rsj`]
//! computes per-term records, [`analysis`] aggregates them, [`bm25`] provides
//! a reference lexical system and [`cli`] wires everything into commands.

pub mod analysis;
pub mod bm25;
pub mod cli;
pub mod corpus_index;
pub mod error;
pub mod rsj;
pub mod textproc;
pub mod trec_io;

pub use error::{Error, Result};
