//! Work scheduling hook.
//!
//! Long loops over independent slots (replicas in a tempering run, gradient
//! chunks in a training batch) go through an [`Executor`] so a threaded
//! driver can fan them out. Each slot owns its state and its own random
//! stream, and reductions happen afterwards in slot order, so the numbers
//! are identical whatever the schedule.

/// Applies a function to each element of a slice of independent work items.
pub trait Executor: Sync {
    fn map_inplace<T: Send, F: Fn(&mut T) + Sync>(&self, items: &mut [T], f: F);
}

/// Runs every item on the calling thread, in order.
pub struct Sequential;

impl Executor for Sequential {
    fn map_inplace<T: Send, F: Fn(&mut T) + Sync>(&self, items: &mut [T], f: F) {
        for item in items {
            f(item);
        }
    }
}
