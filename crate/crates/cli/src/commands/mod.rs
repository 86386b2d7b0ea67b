pub mod compare;
pub mod explain;
pub mod replay;
pub mod run;
