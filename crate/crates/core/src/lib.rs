//! Columnar circuits: typed columns, operator circuits, circuit transformations and
//! codecs for representation and compression schemes.

pub mod circuit;
pub mod codec;
pub mod column;
pub mod compress;
pub mod gen;
pub mod ops;
pub mod repr;
pub mod samples;
pub mod transform;

pub use circuit::{Builder, Circuit, EvalError, Signature};
pub use codec::{Codec, CodecError, Registry, SchemeInstance};
pub use column::{Column, ColumnError, ElementType, Value};
pub use ops::{Catalog, Operator, Ports};
