use std::collections::VecDeque;

use crate::mac::Micros;

/// One step of the consecutive-collision counter: `i * (x + i)` for an
/// indicator `i` (1 = collision, 0 = success).
pub fn detector_update(x: u32, collision: bool) -> u32 {
    let i = collision as u32;
    i * (x + i)
}

/// Consecutive-collision detector with threshold `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorState {
    pub x: u32,
    pub m: u32,
    pub alarm_count: u32,
    /// `(start, end)` of the most recent collisions, at most `m` of them.
    pub last_collision_times: VecDeque<(Micros, Micros)>,
    /// Longest run of collisions seen, unaffected by resets.
    pub max_run: u32,
    run: u32,
}

impl DetectorState {
    pub fn new(m: u32) -> Self {
        assert!(m >= 1, "threshold must be >= 1");
        DetectorState {
            x: 0,
            m,
            alarm_count: 0,
            last_collision_times: VecDeque::with_capacity(m as usize),
            max_run: 0,
            run: 0,
        }
    }

    /// Feeds one observation; returns true when the counter reaches `m`.
    /// The counter is reset to 0 right after an alarm.
    pub fn observe(&mut self, collision: bool, start: Micros, end: Micros) -> bool {
        self.x = detector_update(self.x, collision);
        if collision {
            self.run += 1;
            self.max_run = self.max_run.max(self.run);
            if self.last_collision_times.len() == self.m as usize {
                self.last_collision_times.pop_front();
            }
            self.last_collision_times.push_back((start, end));
        } else {
            self.run = 0;
            self.last_collision_times.clear();
        }
        if self.x >= self.m {
            self.x = 0;
            self.alarm_count += 1;
            true
        } else {
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recurrence_examples() {
        let mut x = 0;
        let seen: Vec<u32> = [true, true, false, true]
            .iter()
            .map(|&i| {
                x = detector_update(x, i);
                x
            })
            .collect();
        assert_eq!(seen, vec![1, 2, 0, 1]);
        assert_eq!(detector_update(17, false), 0);
    }

    #[test]
    fn alarm_and_reset_at_threshold() {
        let mut d = DetectorState::new(3);
        assert!(!d.observe(true, 0, 1));
        assert!(!d.observe(true, 2, 3));
        assert!(d.observe(true, 4, 5));
        assert_eq!(d.x, 0);
        assert_eq!(d.alarm_count, 1);
        assert_eq!(d.max_run, 3);
        assert_eq!(d.last_collision_times.len(), 3);
    }

    proptest! {
        #[test]
        fn counter_is_trailing_run_length(seq in proptest::collection::vec(any::<bool>(), 0..200)) {
            let mut x = 0u32;
            for (n, &i) in seq.iter().enumerate() {
                x = detector_update(x, i);
                let run = seq[..=n].iter().rev().take_while(|&&c| c).count() as u32;
                prop_assert_eq!(x, run);
            }
        }

        #[test]
        fn state_stays_below_threshold(seq in proptest::collection::vec(any::<bool>(), 0..300), m in 1u32..8) {
            let mut d = DetectorState::new(m);
            let mut alarms = 0;
            for (n, &i) in seq.iter().enumerate() {
                if d.observe(i, n as u64, n as u64) { alarms += 1; }
                prop_assert!(d.x < m);
            }
            // with reset-on-alarm, alarms = sum over maximal runs of floor(len / m)
            let mut expected = 0;
            let mut run = 0;
            for &i in seq.iter().chain(std::iter::once(&false)) {
                if i { run += 1 } else { expected += run / m; run = 0; }
            }
            prop_assert_eq!(alarms, expected);
        }
    }
}
