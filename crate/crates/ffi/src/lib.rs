//! C ABI surface. Handles are opaque; every call reports status through
//! `AbStatus` and writes results through out-pointers.

mod status;

pub use status::AbStatus;
