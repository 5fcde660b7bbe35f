//! Wall-clock helpers. `std::time::Instant` is unavailable on
//! wasm32-unknown-unknown, where timings read as zero and deadlines never fire.

use std::time::Duration;

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;

#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: Instant::now(),
        }
    }

    pub fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Deadline {
    #[cfg(not(target_arch = "wasm32"))]
    at: Option<Instant>,
}

impl Deadline {
    pub fn none() -> Self {
        Deadline::default()
    }

    pub fn after(budget: Duration) -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Deadline {
                at: Instant::now().checked_add(budget),
            }
        }
        #[cfg(target_arch = "wasm32")]
        {
            let _ = budget;
            Deadline {}
        }
    }

    pub fn expired(&self) -> bool {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.at.is_some_and(|at| Instant::now() >= at)
        }
        #[cfg(target_arch = "wasm32")]
        {
            false
        }
    }
}
