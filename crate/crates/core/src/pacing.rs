//! Loop pacing. Module loops wait through a [`Pacer`] so they can run against
//! virtual time (tests, Monte Carlo) or the wall clock (live serving).

use std::time::{Duration, Instant};

pub trait Pacer {
    /// Block until `period` after the previous deadline.
    fn wait(&mut self, period: Duration);
    /// Time elapsed since the pacer started.
    fn elapsed(&self) -> Duration;
}

/// Advances a virtual clock without sleeping.
#[derive(Debug, Default, Clone)]
pub struct VirtualPacer {
    elapsed: Duration,
}

impl VirtualPacer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Pacer for VirtualPacer {
    fn wait(&mut self, period: Duration) {
        self.elapsed += period;
    }

    fn elapsed(&self) -> Duration {
        self.elapsed
    }
}

/// Sleeps to absolute deadlines so per-iteration work does not accumulate drift.
#[derive(Debug, Clone)]
pub struct WallPacer {
    start: Instant,
    deadline: Duration,
}

impl WallPacer {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            deadline: Duration::ZERO,
        }
    }
}

impl Default for WallPacer {
    fn default() -> Self {
        Self::new()
    }
}

impl Pacer for WallPacer {
    fn wait(&mut self, period: Duration) {
        self.deadline += period;
        let target = self.start + self.deadline;
        let now = Instant::now();
        if target > now {
            std::thread::sleep(target - now);
        }
    }

    fn elapsed(&self) -> Duration {
        self.deadline
    }
}
