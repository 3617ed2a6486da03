//! Address-free reconstruction of transaction linkage, extraction of
//! unknown-output T-DAGs, canonical labeling and isomorphism clustering.

pub mod canon;
pub mod cluster;
pub mod ledger;
pub mod oracle;
pub mod script;
pub mod tdag;
pub mod tiograph;
pub mod union_find;
