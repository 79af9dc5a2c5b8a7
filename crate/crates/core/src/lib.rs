//! Ethics auditing of app-store reviews.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`] collects reviews from the stores or from files and applies
//!    the exclusion criteria.
//! 2. [`textprep`] cleans and lemmatizes review text and computes corpus
//!    statistics.
//! 3. [`corpus`] detects multiword phrases and builds the bag-of-words corpus.
//! 4. [`topicmodel`] trains LDA by collapsed Gibbs sampling; [`coherence`]
//!    scores topics with C_v and picks the number of topics.
//! 5. [`align`] maps topics onto an ethics taxonomy by embedding similarity,
//!    flags emergent themes and applies human review decisions.
//! 6. [`sentiment`] scores each review's polarity toward its ethical aspects.
//!
//! [`pipeline`] ties the stages together through a run directory,
//! [`report`] renders the tables, and [`server`] exposes a run to the review
//! UI.

pub mod align;
pub mod coherence;
pub mod corpus;
pub mod http;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod sentiment;
pub mod server;
pub mod textprep;
pub mod topicmodel;
