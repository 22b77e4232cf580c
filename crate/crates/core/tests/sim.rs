mod common;

use common::oracle_distance;

use mmg_teleop::control::VelocityCommand;
use mmg_teleop::sim::{
    classify_grasp, default_catalog, required_grip_force, trajectory_deviation, transport_check, Course, EventKind,
    GraspOutcome, ObjectSpec, ObjectState, PathSpec, Point, Pose, ReleaseOutcome, ReleaseStrategy, RobotParams,
    TraceSample, TransportEvent, Velocity, World,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cmd(vx: f64, vy: f64, omega: f64) -> VelocityCommand {
    VelocityCommand { vx, vy, omega, t_ms: 0 }
}

fn unclipped() -> RobotParams {
    RobotParams {
        accel_limit: f64::INFINITY,
        alpha_limit: f64::INFINITY,
        ..RobotParams::default()
    }
}

fn catalog(name: &str) -> ObjectSpec {
    default_catalog().into_iter().find(|o| o.name == name).unwrap()
}

/// World with the arm lowered and `spec` sitting under the open gripper.
fn world_with(spec: ObjectSpec) -> (World, usize) {
    let mut w = World::new(RobotParams::default(), Pose::default(), vec![], 3).unwrap();
    w.set_arm(0.0).unwrap();
    let at = w.gripper();
    let id = w.add_object(spec, at).unwrap();
    (w, id)
}

proptest! {
    #[test]
    fn command_then_negation_returns_home(
        x in -5.0..5.0f64,
        y in -5.0..5.0f64,
        theta in -3.2..3.2f64,
        vx in -0.5..0.5f64,
        vy in -0.5..0.5f64,
        omega in -1.0..1.0f64,
        steps in 1usize..300,
        dt in 1i64..=50,
    ) {
        let start = Pose { x, y, theta };
        let mut w = World::new(unclipped(), start, vec![], 0).unwrap();
        for _ in 0..steps {
            w.step(&cmd(vx, vy, omega), dt).unwrap();
        }
        for _ in 0..steps {
            w.step(&cmd(-vx, -vy, -omega), dt).unwrap();
        }
        prop_assert!((w.pose.x - x).abs() < 1e-9);
        prop_assert!((w.pose.y - y).abs() < 1e-9);
        prop_assert!((w.pose.theta - theta).abs() < 1e-9);
    }
}

#[test]
fn range_stop_prevents_collisions_on_the_course() {
    let course = Course::standard();
    for (seed, params) in [(11, RobotParams::default()), (12, unclipped())] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = World::new(params, course.start_pose(), course.obstacles.clone(), seed).unwrap();
        let mut c = cmd(0.0, 0.0, 0.0);
        let mut hold = 0;
        for _ in 0..100_000 {
            if hold == 0 {
                c = cmd(rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5), rng.random_range(-1.0..=1.0));
                hold = rng.random_range(5..200);
            }
            hold -= 1;
            w.step(&c, 10).unwrap();
        }
        assert_eq!(w.metrics().collisions, 0, "seed {seed}");
        assert!(w.metrics().estops > 0, "seed {seed}: the walk never reached an obstacle");
        assert!(w.metrics().distance_m > 10.0);
    }
}

#[test]
fn collisions_happen_without_the_range_sensor() {
    let course = Course::standard();
    let params = RobotParams {
        ultrasonic_enabled: false,
        ..RobotParams::default()
    };
    let mut w = World::new(params, course.start_pose(), course.obstacles.clone(), 0).unwrap();
    for _ in 0..2000 {
        w.step(&cmd(0.0, 0.5, 0.0), 10).unwrap();
    }
    assert!(w.metrics().collisions > 0);
}

#[test]
fn deviation_matches_brute_force_geometry() {
    let course = Course::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..400);
        let pts: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-1.0..3.5), rng.random_range(-1.0..3.0)))
            .collect();
        let oracle = 100.0 * pts.iter().map(|p| oracle_distance(*p, &course.path)).sum::<f64>() / n as f64;
        let got = trajectory_deviation(&pts, &course.path).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }
}

#[test]
fn deviation_examples() {
    let course = Course::standard();
    let len = course.path.length();
    let on: Vec<Point> = (0..500).map(|i| course.path.at(len * i as f64 / 500.0).0).collect();
    assert!(trajectory_deviation(&on, &course.path).unwrap() < 1e-12);

    let path = PathSpec::new(vec![Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(4.0, 4.0)]).unwrap();
    let off: Vec<Point> = (1..40).map(|i| Point::new(0.05 * i as f64, 0.05)).collect();
    assert!((trajectory_deviation(&off, &path).unwrap() - 5.0).abs() < 1e-9);
    assert!(trajectory_deviation(&[], &path).is_err());
}

#[test]
fn grip_force_is_monotone_over_the_grid() {
    let masses: Vec<f64> = (0..20).map(|i| 50.0 + 450.0 * i as f64 / 19.0).collect();
    let roughness: Vec<f64> = (0..20).map(|i| 100.0 * i as f64 / 19.0).collect();
    for &m in &masses {
        for r in roughness.windows(2) {
            assert!(required_grip_force(m, r[1]) < required_grip_force(m, r[0]));
        }
    }
    for &r in &roughness {
        for m in masses.windows(2) {
            assert!(required_grip_force(m[1], r) > required_grip_force(m[0], r));
        }
    }
}

#[test]
fn grip_force_examples() {
    let smooth = required_grip_force(200.0, 5.0);
    let coarse = required_grip_force(200.0, 90.0);
    assert!((smooth - 1.5 * 0.2 * 9.81 / (2.0 * 0.28)).abs() < 1e-12);
    assert!((smooth - 5.26).abs() < 0.005);
    assert!((coarse - 1.86).abs() < 0.005);
    assert!(coarse < smooth);
}

#[test]
fn grasp_outcomes() {
    let watch = catalog("watch");
    let req = watch.required_force();
    assert_eq!(classify_grasp(&watch, req), GraspOutcome::Held);
    assert_eq!(classify_grasp(&watch, req * 0.999), GraspOutcome::Slip);

    let fragile = ObjectSpec {
        name: "shell".into(),
        mass_g: 50.0,
        fragility_n: 3.0,
        ..watch.clone()
    };
    // Damage wins over holding.
    assert!(fragile.required_force() < 5.0);
    assert_eq!(classify_grasp(&fragile, 5.0), GraspOutcome::Damaged);
    let (mut w, id) = world_with(fragile);
    assert_eq!(w.grasp(id, 5.0).unwrap(), GraspOutcome::Damaged);
    assert_eq!(w.objects[id].state, ObjectState::Damaged);
    assert!(w.events().iter().any(|e| e.kind == EventKind::Damaged));

    let (mut w, id) = world_with(watch.clone());
    w.objects[id].position.x += 0.05;
    assert_eq!(w.grasp(id, req).unwrap(), GraspOutcome::Missed);
    assert_eq!(w.objects[id].state, ObjectState::Resting);

    let (mut w, id) = world_with(watch.clone());
    let other = w.add_object(catalog("earphones"), w.gripper()).unwrap();
    assert_eq!(w.grasp(id, req).unwrap(), GraspOutcome::Held);
    assert_eq!(w.held(), Some(id));
    assert!(w.grasp(other, 5.0).is_err());
}

fn trace(n: usize, f: impl Fn(usize) -> (Velocity, f64, f64)) -> Vec<TraceSample> {
    (0..n)
        .map(|i| {
            let (vel, arm, grip) = f(i);
            TraceSample {
                t_ms: 10 * i as i64,
                pose: Pose::default(),
                vel,
                arm,
                grip_force: grip,
                required: Some(3.0),
                liquid: true,
            }
        })
        .collect()
}

#[test]
fn calm_transport_keeps_the_water() {
    let p = RobotParams::default();
    let t = trace(500, |_| (Velocity { vx: 0.3, vy: 0.0, omega: 0.0 }, 0.5, 4.0));
    assert!(transport_check(&t, &[], &p).is_empty());

    let (mut w, id) = world_with(catalog("water_cup"));
    let f = w.objects[id].spec.required_force() + 0.5;
    assert_eq!(w.grasp(id, f).unwrap(), GraspOutcome::Held);
    w.set_arm(0.6).unwrap();
    for _ in 0..600 {
        w.step(&cmd(0.3, 0.0, 0.0), 10).unwrap();
    }
    assert_eq!(w.metrics().spills, 0);
    assert_eq!(w.held(), Some(id));
}

#[test]
fn sharp_turn_spills_the_water() {
    let p = RobotParams::default();
    // Omega ramps at 5 rad/s^2 for 300 ms.
    let t = trace(100, |i| {
        let omega = if i < 30 { 0.05 * i as f64 } else { 1.5 };
        (Velocity { vx: 0.0, vy: 0.0, omega }, 0.5, 4.0)
    });
    let ev = transport_check(&t, &[], &p);
    assert_eq!(ev.iter().filter(|e| e.1 == TransportEvent::Spill).count(), 1);
    assert!(ev[0].0 > 100 && ev[0].0 <= 300);

    // The same ramp for only 80 ms stays below the hold time.
    let short = trace(100, |i| (Velocity { vx: 0.0, vy: 0.0, omega: 0.05 * i.min(8) as f64 }, 0.5, 4.0));
    assert!(transport_check(&short, &[], &p).is_empty());

    let (mut w, id) = world_with(catalog("water_cup"));
    let f = w.objects[id].spec.required_force() + 0.5;
    w.grasp(id, f).unwrap();
    w.set_arm(0.6).unwrap();
    for _ in 0..100 {
        w.step(&cmd(0.0, 0.0, 1.0), 10).unwrap();
    }
    assert_eq!(w.metrics().spills, 1);
}

#[test]
fn uncorrected_slip_drops_a_lifted_object() {
    let p = RobotParams::default();
    let lifted = trace(80, |_| (Velocity::default(), 0.5, 2.0));
    let ev = transport_check(&lifted, &[], &p);
    assert_eq!(ev, vec![(510, TransportEvent::Drop)]);

    let resting = trace(80, |_| (Velocity::default(), 0.05, 2.0));
    assert!(transport_check(&resting, &[], &p).is_empty());

    // Corrected at 400 ms.
    let corrected = trace(80, |i| (Velocity::default(), 0.5, if i < 40 { 2.0 } else { 3.5 }));
    assert!(transport_check(&corrected, &[], &p).is_empty());
}

#[test]
fn release_outcomes() {
    let (mut w, id) = world_with(catalog("water_cup"));
    w.grasp(id, 4.0).unwrap();
    let t0 = w.clock_ms();
    assert_eq!(w.release(ReleaseStrategy::Gradual).unwrap(), ReleaseOutcome::Placed);
    assert_eq!(w.clock_ms() - t0, 1500);
    assert_eq!(w.objects[id].state, ObjectState::Placed);
    assert!(w.held().is_none());

    let (mut w, id) = world_with(catalog("watch"));
    w.grasp(id, 6.0).unwrap();
    assert_eq!(w.release(ReleaseStrategy::Standard).unwrap(), ReleaseOutcome::Placed);

    let (mut w, id) = world_with(catalog("watch"));
    w.grasp(id, 6.0).unwrap();
    w.set_arm(0.8).unwrap();
    assert_eq!(w.release(ReleaseStrategy::Gradual).unwrap(), ReleaseOutcome::Tipped);

    let (mut w, id) = world_with(catalog("water_cup"));
    w.grasp(id, 4.0).unwrap();
    w.set_arm(0.8).unwrap();
    assert_eq!(w.release(ReleaseStrategy::Gradual).unwrap(), ReleaseOutcome::Spilled);

    let (mut w, id) = world_with(catalog("watch"));
    w.grasp(id, 6.0).unwrap();
    w.vel.vx = 0.1;
    assert!(w.release(ReleaseStrategy::Gradual).is_err());
    assert_eq!(w.held(), Some(id));

    let (mut w, _) = world_with(catalog("watch"));
    assert!(w.release(ReleaseStrategy::Gradual).is_err());
}

#[test]
fn step_examples() {
    let mut w = World::new(unclipped(), Pose::default(), vec![], 0).unwrap();
    for _ in 0..100 {
        w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
    }
    assert!((w.pose.x - 0.5).abs() < 1e-12 && w.pose.y == 0.0);

    // Commands beyond the limits are clamped.
    let mut w = World::new(unclipped(), Pose::default(), vec![], 0).unwrap();
    w.step(&cmd(3.0, 0.0, 9.0), 10).unwrap();
    assert!((w.vel.vx - 0.5).abs() < 1e-15 && (w.vel.omega - 1.0).abs() < 1e-15);

    // Slew limits ramp the velocity.
    let mut w = World::new(RobotParams::default(), Pose::default(), vec![], 0).unwrap();
    w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
    assert!((w.vel.vx - 0.015).abs() < 1e-12);

    // An emergency stop zeroes motion immediately.
    w.set_estop(true);
    w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
    assert_eq!(w.vel, Velocity::default());

    let mut w = World::new(unclipped(), Pose::default(), vec![], 0).unwrap();
    assert!(w.step(&cmd(f64::NAN, 0.0, 0.0), 10).is_err());
    assert!(w.step(&cmd(0.0, 0.0, 0.0), 0).is_err());
}
