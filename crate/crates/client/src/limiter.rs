use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Spaces request starts evenly to stay under a per-minute budget.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    /// `None` or zero means unlimited.
    pub fn new(requests_per_minute: Option<u32>) -> Self {
        let interval = match requests_per_minute {
            Some(n) if n > 0 => Duration::from_secs_f64(60.0 / f64::from(n)),
            _ => Duration::ZERO,
        };
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until the caller may start a request.
    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaces_requests() {
        let l = RateLimiter::new(Some(1200)); // one per 50ms
        let start = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        assert!(start.elapsed() >= Duration::from_millis(150));
    }

    #[test]
    fn unlimited_does_not_wait() {
        let l = RateLimiter::new(None);
        let start = Instant::now();
        for _ in 0..1000 {
            l.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(50));
    }
}
