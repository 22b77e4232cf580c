use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Point, Rect};
use super::objects::{spill_probability, ObjectSpec, ReleaseOutcome, ReleaseStrategy};
use crate::control::VelocityCommand;
use crate::error::{Error, Result};
use crate::rng::rng_for;

pub const MAX_DT_MS: i64 = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub radius_m: f64,
    pub v_max: f64,
    pub omega_max: f64,
    /// Translational slew limit, m/s^2. Infinite disables slewing.
    pub accel_limit: f64,
    /// Rotational slew limit, rad/s^2.
    pub alpha_limit: f64,
    /// Gripper centre distance from the base centre with the arm raised.
    pub gripper_base_m: f64,
    /// Additional forward reach with the arm fully lowered.
    pub arm_reach_m: f64,
    pub gripper_radius_m: f64,
    pub max_aperture_m: f64,
    pub ultrasonic_enabled: bool,
    pub ultrasonic_range_m: f64,
    pub stop_threshold_m: f64,
    pub scrape_inflation_m: f64,
    pub spill_alpha: f64,
    pub spill_accel: f64,
    pub spill_hold_ms: i64,
    pub drop_after_ms: i64,
    pub align_tolerance_m: f64,
    pub stationary_speed: f64,
    /// Arm angle above which a release drops the object from height.
    pub place_height_rad: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            radius_m: 0.2,
            v_max: 0.5,
            omega_max: 1.0,
            accel_limit: 1.5,
            alpha_limit: 5.0,
            gripper_base_m: 0.16,
            arm_reach_m: 0.12,
            gripper_radius_m: 0.03,
            max_aperture_m: 0.08,
            ultrasonic_enabled: true,
            ultrasonic_range_m: 2.0,
            stop_threshold_m: 0.15,
            scrape_inflation_m: 0.02,
            spill_alpha: 3.0,
            spill_accel: 2.0,
            spill_hold_ms: 100,
            drop_after_ms: 500,
            align_tolerance_m: 0.04,
            stationary_speed: 0.02,
            place_height_rad: 0.1,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("radius_m", self.radius_m),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("accel_limit", self.accel_limit),
            ("alpha_limit", self.alpha_limit),
            ("gripper_radius_m", self.gripper_radius_m),
            ("max_aperture_m", self.max_aperture_m),
            ("ultrasonic_range_m", self.ultrasonic_range_m),
            ("stop_threshold_m", self.stop_threshold_m),
            ("spill_alpha", self.spill_alpha),
            ("spill_accel", self.spill_accel),
            ("align_tolerance_m", self.align_tolerance_m),
            ("stationary_speed", self.stationary_speed),
        ];
        for (name, v) in pos {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::Config(format!("robot.{name} must be positive, got {v}")));
            }
        }
        if self.gripper_base_m < 0.0 || self.arm_reach_m < 0.0 || self.scrape_inflation_m < 0.0 {
            return Err(Error::Config("gripper geometry must be non-negative".into()));
        }
        if self.spill_hold_ms < 0 || self.drop_after_ms < 0 {
            return Err(Error::Config("timers must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Body-frame base velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Velocity {
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    /// World-frame translational velocity at heading `theta`.
    pub fn world(&self, theta: f64) -> (f64, f64) {
        let (s, c) = theta.sin_cos();
        (self.vx * c - self.vy * s, self.vx * s + self.vy * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collision,
    Estop,
    Scrape,
    Spill,
    Drop,
    Damaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t_ms: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    Resting,
    Held,
    Damaged,
    Dropped,
    Spilled,
    Placed,
    Tipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub spec: ObjectSpec,
    pub position: Point,
    pub state: ObjectState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspOutcome {
    Held,
    Slip,
    Damaged,
    Missed,
}

/// One recorded simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_ms: i64,
    pub pose: Pose,
    pub vel: Velocity,
    pub arm: f64,
    pub grip_force: f64,
    /// Required force of the held object, if any.
    pub required: Option<f64>,
    pub liquid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportEvent {
    Drop,
    Spill,
    Scrape,
}

/// Streaming detector for spill, drop and scrape during transport.
#[derive(Debug, Clone, Default)]
pub struct TransportMonitor {
    prev: Option<TraceSample>,
    over_since: Option<i64>,
    slip_since: Option<i64>,
    spilled: bool,
    scraping: bool,
}

impl TransportMonitor {
    pub fn reset(&mut self) {
        *self = TransportMonitor::default();
    }

    pub fn update(&mut self, s: &TraceSample, obstacles: &[Rect], p: &RobotParams) -> Vec<TransportEvent> {
        let mut out = Vec::new();
        let Some(required) = s.required else {
            self.reset();
            return out;
        };
        if let Some(prev) = self.prev.filter(|q| s.t_ms > q.t_ms) {
            let dt = (s.t_ms - prev.t_ms) as f64 / 1000.0;
            let (vx0, vy0) = prev.vel.world(prev.pose.theta);
            let (vx1, vy1) = s.vel.world(s.pose.theta);
            let accel = (vx1 - vx0).hypot(vy1 - vy0) / dt;
            let alpha = (s.vel.omega - prev.vel.omega).abs() / dt;
            if s.liquid && (alpha > p.spill_alpha || accel > p.spill_accel) {
                let since = *self.over_since.get_or_insert(prev.t_ms);
                if s.t_ms - since > p.spill_hold_ms && !self.spilled {
                    self.spilled = true;
                    out.push(TransportEvent::Spill);
                }
            } else {
                self.over_since = None;
            }
        }
        // Gravity only loads the grip once the arm has lifted the object.
        if s.grip_force < required && s.arm > p.place_height_rad {
            let since = *self.slip_since.get_or_insert(s.t_ms);
            if s.t_ms - since > p.drop_after_ms {
                out.push(TransportEvent::Drop);
                self.slip_since = None;
            }
        } else {
            self.slip_since = None;
        }
        let g = gripper_point(&s.pose, s.arm, p);
        let scraping = obstacles
            .iter()
            .any(|r| r.distance(g) < p.gripper_radius_m + p.scrape_inflation_m);
        if scraping && !self.scraping {
            out.push(TransportEvent::Scrape);
        }
        self.scraping = scraping;
        self.prev = Some(*s);
        out
    }
}

/// Runs the transport detector over a recorded trace.
pub fn transport_check(trace: &[TraceSample], obstacles: &[Rect], p: &RobotParams) -> Vec<(i64, TransportEvent)> {
    let mut m = TransportMonitor::default();
    trace
        .iter()
        .flat_map(|s| m.update(s, obstacles, p).into_iter().map(move |e| (s.t_ms, e)))
        .collect()
}

pub fn gripper_point(pose: &Pose, arm: f64, p: &RobotParams) -> Point {
    let reach = p.gripper_base_m + p.arm_reach_m * arm.cos();
    let (s, c) = pose.theta.sin_cos();
    Point::new(pose.x + reach * c, pose.y + reach * s)
}

/// Forward range reading along the heading from the body edge.
pub fn ultrasonic(world: &World, max_range_m: f64, stop_threshold_m: f64) -> (f64, bool) {
    let (s, c) = world.pose.theta.sin_cos();
    let o = Point::new(
        world.pose.x + world.params.radius_m * c,
        world.pose.y + world.params.radius_m * s,
    );
    let d = world
        .obstacles
        .iter()
        .filter_map(|r| ray_rect(o, (c, s), r))
        .fold(max_range_m, f64::min);
    (d, d < stop_threshold_m)
}

/// Distance along a unit ray to a rectangle (slab method).
fn ray_rect(o: Point, d: (f64, f64), r: &Rect) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for (o, d, lo, hi) in [(o.x, d.0, r.min_x, r.max_x), (o.y, d.1, r.min_y, r.max_y)] {
        if d.abs() < 1e-15 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let (a, b) = ((lo - o) / d, (hi - o) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 <= t1).then_some(t0)
}

/// Aggregate counters derived from the step history.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: u64,
    pub distance_m: f64,
    pub collisions: u32,
    pub estops: u32,
    pub scrapes: u32,
    pub spills: u32,
    pub drops: u32,
}

#[derive(Debug, Clone)]
pub struct World {
    pub params: RobotParams,
    pub pose: Pose,
    pub vel: Velocity,
    pub obstacles: Vec<Rect>,
    pub objects: Vec<PlacedObject>,
    arm: f64,
    aperture: f64,
    grip_force: f64,
    held: Option<usize>,
    clock_ms: i64,
    blocked: bool,
    estop_latched: bool,
    events: Vec<SimEvent>,
    trace: Vec<TraceSample>,
    metrics: Metrics,
    monitor: TransportMonitor,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(params: RobotParams, pose: Pose, obstacles: Vec<Rect>, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(pose.x.is_finite() && pose.y.is_finite() && pose.theta.is_finite()) {
            return Err(Error::InvalidSpec("initial pose must be finite".into()));
        }
        if obstacles.iter().any(|r| r.distance(pose.point()) < params.radius_m) {
            return Err(Error::InvalidSpec("initial pose overlaps an obstacle".into()));
        }
        let aperture = params.max_aperture_m;
        Ok(World {
            params,
            pose,
            vel: Velocity::default(),
            obstacles,
            objects: Vec::new(),
            arm: std::f64::consts::FRAC_PI_2,
            aperture,
            grip_force: 0.0,
            held: None,
            clock_ms: 0,
            blocked: false,
            estop_latched: false,
            events: Vec::new(),
            trace: Vec::new(),
            metrics: Metrics::default(),
            monitor: TransportMonitor::default(),
            rng: rng_for(seed, &[0x5170]),
        })
    }

    pub fn add_object(&mut self, spec: ObjectSpec, position: Point) -> Result<usize> {
        spec.validate()?;
        self.objects.push(PlacedObject {
            spec,
            position,
            state: ObjectState::Resting,
        });
        Ok(self.objects.len() - 1)
    }

    pub fn clock_ms(&self) -> i64 {
        self.clock_ms
    }
    pub fn arm(&self) -> f64 {
        self.arm
    }
    pub fn aperture(&self) -> f64 {
        self.aperture
    }
    pub fn grip_force(&self) -> f64 {
        self.grip_force
    }
    pub fn held(&self) -> Option<usize> {
        self.held
    }
    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }
    pub fn trace(&self) -> &[TraceSample] {
        &self.trace
    }
    pub fn metrics(&self) -> Metrics {
        self.metrics
    }
    pub fn gripper(&self) -> Point {
        gripper_point(&self.pose, self.arm, &self.params)
    }

    /// Required grip force of the held object.
    pub fn required_force(&self) -> Option<f64> {
        self.held.map(|i| self.objects[i].spec.required_force())
    }

    pub fn slipping(&self) -> bool {
        self.required_force().is_some_and(|r| self.grip_force < r)
    }

    /// Latches or clears an operator emergency stop.
    pub fn set_estop(&mut self, on: bool) {
        self.estop_latched = on;
        if on {
            self.vel = Velocity::default();
        }
    }

    pub fn estop_latched(&self) -> bool {
        self.estop_latched
    }

    pub fn set_arm(&mut self, angle: f64) -> Result<()> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&angle) {
            return Err(Error::RejectedInput(format!("arm angle {angle} outside [0, pi/2]")));
        }
        self.arm = angle;
        Ok(())
    }

    pub fn set_aperture(&mut self, a: f64) -> Result<()> {
        if !(0.0..=self.params.max_aperture_m).contains(&a) {
            return Err(Error::RejectedInput(format!("aperture {a} outside [0, {}]", self.params.max_aperture_m)));
        }
        self.aperture = a;
        Ok(())
    }

    fn push_event(&mut self, kind: EventKind) {
        match kind {
            EventKind::Collision => self.metrics.collisions += 1,
            EventKind::Estop => self.metrics.estops += 1,
            EventKind::Scrape => self.metrics.scrapes += 1,
            EventKind::Spill => self.metrics.spills += 1,
            EventKind::Drop => self.metrics.drops += 1,
            EventKind::Damaged => {}
        }
        self.events.push(SimEvent {
            t_ms: self.clock_ms,
            kind,
        });
    }

    /// Distance from the body edge to the nearest obstacle point ahead of the
    /// motion direction, as seen by the ring of range sensors.
    pub fn motion_clearance(&self, dir: (f64, f64)) -> f64 {
        let c = self.pose.point();
        self.obstacles
            .iter()
            .filter_map(|r| {
                let q = r.nearest(c);
                ((q.x - c.x) * dir.0 + (q.y - c.y) * dir.1 > 0.0).then(|| c.dist(q) - self.params.radius_m)
            })
            .fold(self.params.ultrasonic_range_m, f64::min)
    }

    /// Advances the world by `dt_ms` under a commanded body velocity.
    pub fn step(&mut self, cmd: &VelocityCommand, dt_ms: i64) -> Result<Vec<SimEvent>> {
        if !(1..=MAX_DT_MS).contains(&dt_ms) {
            return Err(Error::RejectedInput(format!("dt {dt_ms} ms outside (0, {MAX_DT_MS}]")));
        }
        if !(cmd.vx.is_finite() && cmd.vy.is_finite() && cmd.omega.is_finite()) {
            return Err(Error::RejectedInput("velocity command must be finite".into()));
        }
        let first_event = self.events.len();
        let p = &self.params;
        let dt = dt_ms as f64 / 1000.0;
        let target = if self.estop_latched {
            Velocity::default()
        } else {
            Velocity {
                vx: cmd.vx.clamp(-p.v_max, p.v_max),
                vy: cmd.vy.clamp(-p.v_max, p.v_max),
                omega: cmd.omega.clamp(-p.omega_max, p.omega_max),
            }
        };
        let dv = p.accel_limit * dt;
        let dw = p.alpha_limit * dt;
        let mut v = if self.estop_latched {
            target
        } else {
            Velocity {
                vx: self.vel.vx + (target.vx - self.vel.vx).clamp(-dv, dv),
                vy: self.vel.vy + (target.vy - self.vel.vy).clamp(-dv, dv),
                omega: self.vel.omega + (target.omega - self.vel.omega).clamp(-dw, dw),
            }
        };

        let theta_mid = self.pose.theta + 0.5 * v.omega * dt;
        if self.params.ultrasonic_enabled && v.speed() > 0.0 {
            let (wx, wy) = v.world(theta_mid);
            let n = wx.hypot(wy);
            let blocked = self.motion_clearance((wx / n, wy / n)) < self.params.stop_threshold_m;
            if blocked {
                v.vx = 0.0;
                v.vy = 0.0;
                if !self.blocked {
                    self.push_event(EventKind::Estop);
                }
            }
            self.blocked = blocked;
        } else {
            self.blocked = false;
        }

        let (wx, wy) = v.world(theta_mid);
        let next = Pose {
            x: self.pose.x + wx * dt,
            y: self.pose.y + wy * dt,
            theta: self.pose.theta + v.omega * dt,
        };
        let r = self.params.radius_m;
        if self.obstacles.iter().any(|o| o.distance(next.point()) < r) {
            self.vel = Velocity::default();
            self.push_event(EventKind::Collision);
        } else {
            self.metrics.distance_m += self.pose.point().dist(next.point());
            self.pose = next;
            self.vel = v;
        }
        self.clock_ms += dt_ms;
        self.metrics.steps += 1;
        self.record();
        Ok(self.events[first_event..].to_vec())
    }

    fn sample(&self) -> TraceSample {
        TraceSample {
            t_ms: self.clock_ms,
            pose: self.pose,
            vel: self.vel,
            arm: self.arm,
            grip_force: self.grip_force,
            required: self.required_force(),
            liquid: self.held.is_some_and(|i| self.objects[i].spec.liquid),
        }
    }

    fn record(&mut self) {
        let s = self.sample();
        self.trace.push(s);
        let held = self.held;
        for e in self.monitor.update(&s, &self.obstacles, &self.params) {
            match e {
                TransportEvent::Scrape => self.push_event(EventKind::Scrape),
                TransportEvent::Spill => {
                    self.push_event(EventKind::Spill);
                    if let Some(i) = held {
                        self.objects[i].spec.fill = 0.0;
                    }
                }
                TransportEvent::Drop => {
                    self.push_event(EventKind::Drop);
                    if let Some(i) = held {
                        self.objects[i].state = ObjectState::Dropped;
                        self.objects[i].position = gripper_point(&self.pose, self.arm, &self.params);
                    }
                    self.held = None;
                    self.grip_force = 0.0;
                }
            }
        }
    }

    /// Closes the gripper on object `id` with `force` newtons.
    pub fn grasp(&mut self, id: usize, force: f64) -> Result<GraspOutcome> {
        if self.held.is_some() {
            return Err(Error::Action("grasp while already holding an object".into()));
        }
        if !(force.is_finite() && force >= 0.0) {
            return Err(Error::RejectedInput(format!("grip force {force} must be finite and non-negative")));
        }
        let obj = self
            .objects
            .get(id)
            .ok_or_else(|| Error::RejectedInput(format!("unknown object {id}")))?;
        if obj.state != ObjectState::Resting && obj.state != ObjectState::Placed {
            return Err(Error::Action(format!("object {} is not available", obj.spec.name)));
        }
        let misaligned = self.gripper().dist(obj.position) > self.params.align_tolerance_m;
        if misaligned || self.aperture < obj.spec.width_cm / 100.0 {
            return Ok(GraspOutcome::Missed);
        }
        let outcome = classify_grasp(&obj.spec, force);
        let width_m = obj.spec.width_cm / 100.0;
        match outcome {
            GraspOutcome::Damaged => {
                self.objects[id].state = ObjectState::Damaged;
                self.push_event(EventKind::Damaged);
            }
            GraspOutcome::Held | GraspOutcome::Slip => {
                self.objects[id].state = ObjectState::Held;
                self.held = Some(id);
                self.grip_force = force;
                self.aperture = width_m;
                self.monitor.reset();
            }
            GraspOutcome::Missed => {}
        }
        Ok(outcome)
    }

    /// Changes the squeeze force on the held object.
    pub fn set_grip_force(&mut self, force: f64) -> Result<()> {
        if !(force.is_finite() && force >= 0.0) {
            return Err(Error::RejectedInput(format!("grip force {force} must be finite and non-negative")));
        }
        let Some(id) = self.held else {
            return Err(Error::Action("no object held".into()));
        };
        if force > self.objects[id].spec.fragility_n {
            self.objects[id].state = ObjectState::Damaged;
            self.held = None;
            self.grip_force = 0.0;
            self.push_event(EventKind::Damaged);
        } else {
            self.grip_force = force;
        }
        Ok(())
    }

    /// Opens the gripper on the held object with the given force ramp.
    pub fn release(&mut self, strategy: ReleaseStrategy) -> Result<ReleaseOutcome> {
        let Some(id) = self.held else {
            return Err(Error::Action("release without a held object".into()));
        };
        if self.vel.speed() >= self.params.stationary_speed {
            return Err(Error::Action(format!(
                "release while moving at {:.3} m/s",
                self.vel.speed()
            )));
        }
        let spec = &self.objects[id].spec;
        let from_height = self.arm > self.params.place_height_rad;
        let p_spill = spill_probability(spec, strategy);
        let draw: f64 = self.rng.random();
        let outcome = if from_height {
            if spec.liquid && spec.fill > 0.0 {
                ReleaseOutcome::Spilled
            } else {
                ReleaseOutcome::Tipped
            }
        } else if draw < p_spill {
            ReleaseOutcome::Spilled
        } else {
            ReleaseOutcome::Placed
        };
        self.objects[id].state = match outcome {
            ReleaseOutcome::Placed => ObjectState::Placed,
            ReleaseOutcome::Spilled => ObjectState::Spilled,
            ReleaseOutcome::Tipped => ObjectState::Tipped,
        };
        self.objects[id].position = self.gripper();
        self.held = None;
        self.grip_force = 0.0;
        self.aperture = self.params.max_aperture_m;
        self.clock_ms += strategy.duration_ms();
        self.monitor.reset();
        self.record();
        Ok(outcome)
    }
}

/// Outcome of an aligned grasp; damage is checked before holding.
pub fn classify_grasp(obj: &ObjectSpec, force: f64) -> GraspOutcome {
    if force > obj.fragility_n {
        GraspOutcome::Damaged
    } else if force >= obj.required_force() {
        GraspOutcome::Held
    } else {
        GraspOutcome::Slip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_world() -> World {
        let p = RobotParams {
            accel_limit: f64::INFINITY,
            alpha_limit: f64::INFINITY,
            ..RobotParams::default()
        };
        World::new(p, Pose::default(), vec![], 1).unwrap()
    }

    fn cmd(vx: f64, vy: f64, omega: f64) -> VelocityCommand {
        VelocityCommand { vx, vy, omega, t_ms: 0 }
    }

    #[test]
    fn zero_command_holds_pose() {
        let mut w = open_world();
        for _ in 0..100 {
            w.step(&cmd(0.0, 0.0, 0.0), 10).unwrap();
        }
        assert_eq!(w.pose, Pose::default());
    }

    #[test]
    fn straight_line() {
        let mut w = open_world();
        for _ in 0..200 {
            w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
        }
        assert!((w.pose.x - 1.0).abs() < 1e-12);
        assert_eq!(w.pose.y, 0.0);
    }

    #[test]
    fn strafe_rotated() {
        let mut w = open_world();
        w.pose.theta = std::f64::consts::FRAC_PI_2;
        for _ in 0..100 {
            w.step(&cmd(0.0, 0.3, 0.0), 10).unwrap();
        }
        assert!((w.pose.x + 0.3).abs() < 1e-12);
        assert!(w.pose.y.abs() < 1e-12);
    }

    #[test]
    fn ultrasonic_examples() {
        let wall = |d: f64| Rect::new(0.2 + d, -1.0, 0.2 + d + 0.1, 1.0).unwrap();
        let w = World::new(RobotParams::default(), Pose::default(), vec![], 0).unwrap();
        assert_eq!(ultrasonic(&w, 2.0, 0.15), (2.0, false));
        let w = World::new(RobotParams::default(), Pose::default(), vec![wall(0.10)], 0).unwrap();
        let (d, stop) = ultrasonic(&w, 2.0, 0.15);
        assert!((d - 0.10).abs() < 1e-12 && stop);
        let w = World::new(RobotParams::default(), Pose::default(), vec![wall(0.30)], 0).unwrap();
        let (d, stop) = ultrasonic(&w, 2.0, 0.15);
        assert!((d - 0.30).abs() < 1e-12 && !stop);
    }

    #[test]
    fn stops_before_wall() {
        let wall = Rect::new(1.0, -1.0, 1.2, 1.0).unwrap();
        let mut w = World::new(RobotParams::default(), Pose::default(), vec![wall], 0).unwrap();
        for _ in 0..1000 {
            w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
        }
        assert_eq!(w.metrics().collisions, 0);
        assert_eq!(w.metrics().estops, 1);
        assert!(w.pose.x < 0.8 - 0.14 && w.pose.x > 0.6);
    }

    #[test]
    fn collision_without_sensor() {
        let wall = Rect::new(1.0, -1.0, 1.2, 1.0).unwrap();
        let p = RobotParams {
            ultrasonic_enabled: false,
            ..RobotParams::default()
        };
        let mut w = World::new(p, Pose::default(), vec![wall], 0).unwrap();
        for _ in 0..400 {
            w.step(&cmd(0.5, 0.0, 0.0), 10).unwrap();
        }
        assert!(w.metrics().collisions > 0);
        assert!(w.pose.x <= 0.8);
    }

    #[test]
    fn dt_bounds() {
        let mut w = open_world();
        assert!(w.step(&cmd(0.0, 0.0, 0.0), 0).is_err());
        assert!(w.step(&cmd(0.0, 0.0, 0.0), 51).is_err());
        assert!(w.step(&cmd(0.0, 0.0, 0.0), 50).is_ok());
    }
}
