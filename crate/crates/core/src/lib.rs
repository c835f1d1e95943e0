//! Core of the flow coordinator: models, the expression language, the
//! execution engine, services, and storage.

pub mod clock;
pub mod engine;
pub mod expr;
pub mod model;
pub mod protocol;
pub mod services;
pub mod store;
pub mod value;

pub use value::{ScalarType, Value};
