//! Order-preserving parallel map capability.
//!
//! Modules never spawn threads. Callers that own a pool hand in an
//! implementation of [`ParallelMap`]; results always come back in input order,
//! so parallel and sequential runs produce identical output.

use alloc::vec::Vec;

pub trait ParallelMap: Sync {
    fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl ParallelMap for Sequential {
    fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}
