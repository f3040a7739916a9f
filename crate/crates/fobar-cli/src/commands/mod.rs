pub mod cache;
pub mod rescore;
pub mod run;
pub mod sweep;
pub mod validate;
