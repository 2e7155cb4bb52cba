//! Point-navigation surrogate: oscillator integration, differential steering,
//! and the navigation fitness function.
//!
//! A robot is reduced to a planar pose. Its hinges oscillate under the CPG
//! dynamics; mean oscillator output drives forward speed, and a steering
//! controller damps the joints on the side of the body facing the current
//! target, which turns the pose toward it. Trajectories are sampled at 5 Hz
//! for the path-length penalty.

use serde::{Deserialize, Serialize};

use crate::brain::{BrainGenome, CpgNetwork};
use crate::morphology::MorphologyTree;

/// Upper bound on oscillators the fixed-size integrator scratch supports.
/// Bodies cap at 10 modules, so at most 9 hinges.
const MAX_OSC: usize = 16;

/// Trajectory sample spacing in seconds (5 Hz).
pub const SAMPLE_INTERVAL: f64 = 0.2;

/// Positions are clamped to this half-extent of the arena.
pub const ARENA_HALF: f64 = 5.0;

/// Speed, steering, and integration constants of the surrogate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub v_max: f64,
    pub k_turn: f64,
    pub k_steer: f64,
    pub dt: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams { v_max: 0.15, k_turn: 2.0, k_steer: 0.8, dt: 0.01 }
    }
}

/// The navigation task: targets to visit in order, within a time budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub targets: Vec<[f64; 2]>,
    pub reach_radius: f64,
    pub duration: f64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            targets: vec![[1.0, -1.0], [0.0, -2.0]],
            reach_radius: 0.01,
            duration: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub fitness: f64,
    pub targets_reached: usize,
    pub final_position: [f64; 2],
    /// Sum of distances between consecutive 5 Hz samples.
    pub path_length: f64,
    pub samples: Vec<[f64; 2]>,
}

fn derivatives(net: &CpgNetwork, x: &[f64], y: &[f64], dx: &mut [f64], dy: &mut [f64]) {
    for (i, osc) in net.oscillators.iter().enumerate() {
        dx[i] = osc.weight * y[i];
        dy[i] = -osc.weight * x[i];
    }
    for c in &net.couplings {
        dx[c.b] += c.weight * x[c.a];
        dx[c.a] -= c.weight * x[c.b];
    }
}

fn rk4_step(net: &CpgNetwork, x: &mut [f64], y: &mut [f64], dt: f64) {
    let n = x.len();
    assert!(n <= MAX_OSC, "oscillator count {n} exceeds integrator capacity");
    let mut kx = [[0.0; MAX_OSC]; 4];
    let mut ky = [[0.0; MAX_OSC]; 4];
    let mut tx = [0.0; MAX_OSC];
    let mut ty = [0.0; MAX_OSC];
    derivatives(net, x, y, &mut kx[0][..n], &mut ky[0][..n]);
    for i in 0..n {
        tx[i] = x[i] + 0.5 * dt * kx[0][i];
        ty[i] = y[i] + 0.5 * dt * ky[0][i];
    }
    derivatives(net, &tx[..n], &ty[..n], &mut kx[1][..n], &mut ky[1][..n]);
    for i in 0..n {
        tx[i] = x[i] + 0.5 * dt * kx[1][i];
        ty[i] = y[i] + 0.5 * dt * ky[1][i];
    }
    derivatives(net, &tx[..n], &ty[..n], &mut kx[2][..n], &mut ky[2][..n]);
    for i in 0..n {
        tx[i] = x[i] + dt * kx[2][i];
        ty[i] = y[i] + dt * ky[2][i];
    }
    derivatives(net, &tx[..n], &ty[..n], &mut kx[3][..n], &mut ky[3][..n]);
    for i in 0..n {
        x[i] += dt / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
        y[i] += dt / 6.0 * (ky[0][i] + 2.0 * ky[1][i] + 2.0 * ky[2][i] + ky[3][i]);
    }
}

/// Advance the network state by one RK4 step of size `dt`.
pub fn step_cpg(net: &mut CpgNetwork, dt: f64) {
    let mut x = std::mem::take(&mut net.x);
    let mut y = std::mem::take(&mut net.y);
    rk4_step(net, &mut x, &mut y, dt);
    net.x = x;
    net.y = y;
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Score a trajectory summary against the target sequence.
///
/// Fully credits the leg into each reached target, adds partial credit for
/// progress toward the next unreached one (distance of that leg minus the
/// remaining distance from the final position), and charges a tenth of the
/// sampled path length.
pub fn navigation_fitness(
    targets: &[[f64; 2]],
    reached: usize,
    final_position: [f64; 2],
    path_length: f64,
) -> f64 {
    assert!(reached <= targets.len());
    let mut fitness = 0.0;
    let mut prev = [0.0, 0.0];
    for &t in &targets[..reached] {
        fitness += dist(t, prev);
        prev = t;
    }
    if reached < targets.len() {
        let next = targets[reached];
        fitness += dist(next, prev) - dist(final_position, next);
    }
    fitness - 0.1 * path_length
}

/// Run the surrogate for the task duration and score the trajectory.
///
/// The pose starts at the origin headed at the first target. Each step
/// advances the CPG, damps the joints on the side the target lies on
/// (joints at projected body x > 0 are "right", x < 0 "left"), moves the
/// pose forward at a speed proportional to mean joint activity, and turns
/// it by the right-left activity difference. Once every target is reached
/// the pose keeps steering at the last one.
pub fn rollout(net: &CpgNetwork, params: &SurrogateParams, task: &TaskSpec) -> RolloutResult {
    assert!(!task.targets.is_empty(), "task needs at least one target");
    let n = net.len();
    let morph_factor = (n as f64 / 4.0).min(1.0);
    let mut x = net.x.clone();
    let mut y = net.y.clone();

    let mut px = 0.0_f64;
    let mut py = 0.0_f64;
    let first = task.targets[0];
    let mut theta = f64::atan2(first[1], first[0]);
    let mut reached = 0usize;

    let n_steps = (task.duration / params.dt).round() as usize;
    let sample_every = ((SAMPLE_INTERVAL / params.dt).round() as usize).max(1);
    let mut samples = Vec::with_capacity(n_steps / sample_every + 1);
    samples.push([px, py]);
    let mut path_length = 0.0;

    for step in 1..=n_steps {
        rk4_step(net, &mut x, &mut y, params.dt);

        let aim = task.targets[reached.min(task.targets.len() - 1)];
        let beta = wrap_angle(f64::atan2(aim[1] - py, aim[0] - px) - theta);
        let scale = 1.0 - params.k_steer * beta.abs().min(std::f64::consts::PI)
            / std::f64::consts::PI;

        let mut sum_all = 0.0;
        let mut sum_right = 0.0;
        let mut n_right = 0usize;
        let mut sum_left = 0.0;
        let mut n_left = 0usize;
        for (i, osc) in net.oscillators.iter().enumerate() {
            let mut out = x[i].tanh().abs();
            let side = osc.cell.0;
            if (beta < 0.0 && side > 0) || (beta > 0.0 && side < 0) {
                out *= scale;
            }
            sum_all += out;
            if side > 0 {
                sum_right += out;
                n_right += 1;
            } else if side < 0 {
                sum_left += out;
                n_left += 1;
            }
        }
        let mean_all = if n > 0 { sum_all / n as f64 } else { 0.0 };
        let mean_right = if n_right > 0 { sum_right / n_right as f64 } else { 0.0 };
        let mean_left = if n_left > 0 { sum_left / n_left as f64 } else { 0.0 };

        let v = params.v_max * morph_factor * mean_all;
        px = (px + v * theta.cos() * params.dt).clamp(-ARENA_HALF, ARENA_HALF);
        py = (py + v * theta.sin() * params.dt).clamp(-ARENA_HALF, ARENA_HALF);
        theta += params.k_turn * (mean_right - mean_left) * params.dt;

        while reached < task.targets.len()
            && dist([px, py], task.targets[reached]) <= task.reach_radius
        {
            reached += 1;
        }

        if step % sample_every == 0 {
            let prev = *samples.last().unwrap();
            path_length += dist([px, py], prev);
            samples.push([px, py]);
        }
    }

    let fitness = navigation_fitness(&task.targets, reached, [px, py], path_length);
    RolloutResult {
        fitness,
        targets_reached: reached,
        final_position: [px, py],
        path_length,
        samples,
    }
}

/// Build the body's network from `genome` and score one rollout.
pub fn fitness_of(
    body: &MorphologyTree,
    genome: &BrainGenome,
    params: &SurrogateParams,
    task: &TaskSpec,
) -> f64 {
    let net = crate::brain::build_cpg(body, genome);
    rollout(&net, params, task).fitness
}
