mod common;

use common::reference_mode;

use mmg_teleop::control::*;
use mmg_teleop::gesture::{ForceLevel, Gesture};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAPS: [i64; 7] = [0, 150, 400, 401, 2999, 3000, 5000];

fn check_state(s: &ControlState) {
    assert!(s.is_well_formed(), "{s:?}");
    let tilt = TiltReading::new(30.0, -30.0, 0).unwrap();
    let v = tilt_to_velocity(s.mode(), &tilt, &TiltParams::default());
    assert_eq!(v.is_zero(), s.mode() != Mode::Movement);
}

fn explore(state: &ControlState, history: &mut Vec<ButtonEvent>, t: i64, depth: usize, count: &mut u64) {
    *count += 1;
    check_state(state);
    assert_eq!(state.mode(), reference_mode(history, &ButtonParams::default()), "{history:?}");
    if depth == 6 {
        return;
    }
    for kind in [Press::Press, Press::Release] {
        for gap in GAPS {
            let ev = ButtonEvent { t_ms: t + gap, kind };
            let mut next = state.clone();
            next.on_button(ev).unwrap();
            history.push(ev);
            explore(&next, history, t + gap, depth + 1, count);
            history.pop();
        }
    }
}

#[test]
fn exhaustive_sequences_up_to_six_events() {
    let mut count = 0;
    explore(&ControlState::default(), &mut Vec::new(), 0, 0, &mut count);
    let expected: u64 = (0..=6).map(|k| 14u64.pow(k)).sum();
    assert_eq!(count, expected);
}

#[test]
fn random_streams() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = ButtonParams::default();
    let fb = FeedbackParams::default();
    for _ in 0..100_000 {
        let mut s = ControlState::default();
        let mut hist = Vec::new();
        let mut t = rng.random_range(0..1000);
        for _ in 0..rng.random_range(1..24) {
            t += rng.random_range(0..4000);
            let kind = if rng.random_bool(0.5) { Press::Press } else { Press::Release };
            let ev = ButtonEvent { t_ms: t, kind };
            s.on_button(ev).unwrap();
            hist.push(ev);
            if rng.random_bool(0.2) {
                let level = ForceLevel::from_number(rng.random_range(1..=3)).unwrap();
                let applied = s.apply_grip(GripCommand { gesture: Gesture::Grip, level }, &fb);
                assert_eq!(applied, s.mode() == Mode::Grasp);
            }
            if rng.random_bool(0.2) {
                s.set_feedback(rng.random_range(1..=8));
            }
            check_state(&s);
        }
        assert_eq!(s.mode(), reference_mode(&hist, &params));
    }
}

fn press_release(s: &mut ControlState, t: i64, hold: i64) -> Mode {
    s.on_button(ButtonEvent::press(t)).unwrap();
    s.on_button(ButtonEvent::release(t + hold)).unwrap()
}

#[test]
fn hold_threshold_is_exact() {
    let mut s = ControlState::default();
    assert_eq!(press_release(&mut s, 0, 2999), Mode::Idle);
    let mut s = ControlState::default();
    assert_eq!(press_release(&mut s, 0, 3000), Mode::Movement);
    let mut s = ControlState::default();
    assert_eq!(press_release(&mut s, 0, 3200), Mode::Movement);
}

#[test]
fn double_press_gap_is_exact() {
    for (gap, expect) in [(0, Mode::Grasp), (400, Mode::Grasp), (401, Mode::Idle)] {
        let mut s = ControlState::default();
        press_release(&mut s, 0, 100);
        assert_eq!(press_release(&mut s, 100 + gap, 100), expect, "gap {gap}");
    }
    // Movement to grasp and back.
    let mut s = ControlState::default();
    press_release(&mut s, 0, 3000);
    press_release(&mut s, 4000, 50);
    assert_eq!(press_release(&mut s, 4100, 50), Mode::Grasp);
    assert_eq!(s.feedback_index, Some(1));
    assert_eq!(press_release(&mut s, 5000, 3000), Mode::Movement);
    assert_eq!(s.feedback_index, None);
}

#[test]
fn triple_press_is_one_double() {
    let mut s = ControlState::default();
    press_release(&mut s, 0, 3000);
    press_release(&mut s, 4000, 50);
    press_release(&mut s, 4100, 50);
    assert_eq!(s.mode(), Mode::Grasp);
    // Third short press has no partner yet and does not toggle anything.
    assert_eq!(press_release(&mut s, 4200, 50), Mode::Grasp);
}

proptest! {
    #[test]
    fn tilt_mapping_bounded_and_monotone(a in -90.0f64..=90.0, b in -90.0f64..=90.0, roll in -90.0f64..=90.0) {
        let p = TiltParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let v = |pitch: f64| tilt_to_velocity(Mode::Movement, &TiltReading::new(pitch, roll, 0).unwrap(), &p);
        prop_assert!(v(lo).vx <= v(hi).vx);
        prop_assert!(v(a).vx.abs() <= p.v_max && v(a).omega.abs() <= p.omega_max);
        prop_assert_eq!(v(a).vy, 0.0);
        if a.abs() <= p.dead_zone_deg {
            prop_assert_eq!(v(a).vx, 0.0);
        }
        prop_assert_eq!(v(a).vx, -v(-a).vx);
    }

    #[test]
    fn feedback_cue_in_range(f in 0.0f64..40.0, slip: bool, over: bool) {
        let cue = force_to_feedback(f, slip, over, 12.0).unwrap();
        prop_assert!((1..=8).contains(&cue));
        if over || f > 12.0 {
            prop_assert_eq!(cue, OVER_FORCE_CUE);
        } else if slip {
            prop_assert_eq!(cue, SLIP_CUE);
        } else {
            prop_assert_eq!(cue, force_bin(f, 12.0));
        }
    }
}
