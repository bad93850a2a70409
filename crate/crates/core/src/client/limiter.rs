use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrently outstanding requests.
#[derive(Debug)]
pub(crate) struct Limiter {
    available: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Permit<'a>(&'a Limiter);

impl Limiter {
    pub(crate) fn new(permits: usize) -> Self {
        Self {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().expect("poisoned");
        while *n == 0 {
            n = self.freed.wait(n).expect("poisoned");
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().expect("poisoned") += 1;
        self.0.freed.notify_one();
    }
}
