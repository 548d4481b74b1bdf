pub mod corpus;
pub mod eval;
pub mod fusion;
pub mod index;
pub mod pipeline;
pub mod query;
pub mod retrieval;
pub mod run;
mod util;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/indexing.md")]
    pub mod indexing {}
    #[doc = include_str!("../../../book/src/queries.md")]
    pub mod queries {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    pub mod retrieval {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    pub mod fusion {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
