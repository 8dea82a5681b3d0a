//! Mitosis phase → conditioning colour.

use serde::{Deserialize, Serialize};

pub const INTERPHASE_COLOR: [u8; 3] = [0, 255, 0];
pub const DIVISION_COLOR: [u8; 3] = [0, 0, 255];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MitosisPhase {
    Interphase,
    /// `u ∈ [-1, 1]`: −1 at mitosis onset, 0 on the division frame, +1 once
    /// the daughters have fully reverted.
    Ramp(f64),
}

impl MitosisPhase {
    /// Phase of a cell with the given clock. Half of the cycle is spent on
    /// each side of the division frame.
    pub fn from_clock(clock: Option<i32>, cycle_length: u32) -> Self {
        match clock {
            None => MitosisPhase::Interphase,
            Some(k) => {
                let half = f64::from(cycle_length) / 2.0;
                MitosisPhase::Ramp((f64::from(k) / half).clamp(-1.0, 1.0))
            }
        }
    }
}

/// Green in interphase, blue on the division frame, linear in between.
///
/// With `w = 1 − |u|` the blue channel is `⌊255·w + 0.5⌋` and green takes
/// the remainder, so the two always sum to 255.
pub fn mitosis_color(phase: MitosisPhase) -> [u8; 3] {
    match phase {
        MitosisPhase::Interphase => INTERPHASE_COLOR,
        MitosisPhase::Ramp(u) => {
            let w = 1.0 - u.clamp(-1.0, 1.0).abs();
            let blue = (255.0 * w + 0.5).floor() as u8;
            [0, 255 - blue, blue]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoints() {
        assert_eq!(mitosis_color(MitosisPhase::Interphase), [0, 255, 0]);
        assert_eq!(mitosis_color(MitosisPhase::Ramp(0.0)), [0, 0, 255]);
        assert_eq!(mitosis_color(MitosisPhase::Ramp(1.0)), [0, 255, 0]);
        assert_eq!(mitosis_color(MitosisPhase::Ramp(-1.0)), [0, 255, 0]);
        assert_eq!(mitosis_color(MitosisPhase::Ramp(0.5)), [0, 127, 128]);
        assert_eq!(mitosis_color(MitosisPhase::Ramp(-0.5)), [0, 127, 128]);
    }

    #[test]
    fn clock_to_phase() {
        assert_eq!(MitosisPhase::from_clock(None, 6), MitosisPhase::Interphase);
        assert_eq!(
            MitosisPhase::from_clock(Some(0), 6),
            MitosisPhase::Ramp(0.0)
        );
        assert_eq!(
            MitosisPhase::from_clock(Some(-3), 6),
            MitosisPhase::Ramp(-1.0)
        );
        assert_eq!(
            MitosisPhase::from_clock(Some(5), 6),
            MitosisPhase::Ramp(1.0)
        );
        let MitosisPhase::Ramp(u) = MitosisPhase::from_clock(Some(1), 6) else {
            unreachable!()
        };
        assert!((u - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ramp_is_lipschitz(u in -1.0f64..=1.0, v in -1.0f64..=1.0) {
            let a = mitosis_color(MitosisPhase::Ramp(u));
            let b = mitosis_color(MitosisPhase::Ramp(v));
            let dist = (0..3).map(|c| (i32::from(a[c]) - i32::from(b[c])).abs()).max().unwrap();
            prop_assert!(f64::from(dist) <= 255.0 * (u - v).abs() + 1.0);
            prop_assert_eq!(u16::from(a[1]) + u16::from(a[2]), 255);
            prop_assert_eq!(a[0], 0);
        }
    }
}
