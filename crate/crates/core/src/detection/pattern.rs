use crate::mac::{MacParams, Micros};

/// Checks whether a run of collisions is spaced like prioritized
/// transmissions: every gap between the end of one collision and the start
/// of the next is `sifs + ack + difs`, within one slot. Needs at least two
/// collisions.
pub fn interval_pattern_check(collisions: &[(Micros, Micros)], params: &MacParams) -> bool {
    if collisions.len() < 2 {
        return false;
    }
    let gap = params.priority_gap() as i64;
    let tol = params.tolerance() as i64;
    collisions.windows(2).all(|w| {
        let g = w[1].0 as i64 - w[0].1 as i64;
        (g - gap).abs() <= tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_spacing_matches() {
        let p = MacParams::default();
        // gap 80 = 18 + 28 + 34
        assert!(interval_pattern_check(
            &[(0, 400), (480, 900), (989, 1200)],
            &p
        ));
        assert!(!interval_pattern_check(
            &[(0, 400), (480, 900), (1100, 1200)],
            &p
        ));
        assert!(!interval_pattern_check(&[(0, 400)], &p));
        assert!(!interval_pattern_check(&[], &p));
    }
}
