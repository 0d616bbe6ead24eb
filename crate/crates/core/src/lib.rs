pub mod coinvariants;
pub mod cyclofield;
pub mod error;
pub mod liealg;
pub mod linalg;
pub mod modules;
pub mod properties;
pub mod sections;
