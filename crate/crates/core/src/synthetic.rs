//! Deterministic synthetic match: a ball bouncing between the goals and two
//! teams of damped oscillators pulled toward it from their home positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{GameTrace, ObjectId, TraceMetadata, WorldState, OBJECT_COUNT, POSITION_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub steps: usize,
    pub seed: u64,
    /// Cycles for the ball to go from one end and back.
    pub ball_period: usize,
    /// x extent of the ball's sweep, metres.
    pub ball_reach: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            seed: 7,
            ball_period: 40,
            ball_reach: 45.0,
        }
    }
}

impl SyntheticConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }
}

// 4-4-2 style home positions for the left team, goalie first; the right team mirrors x.
const HOME: [(f64, f64); 11] = [
    (-50.0, 0.0),
    (-36.0, -20.0),
    (-38.0, -7.0),
    (-38.0, 7.0),
    (-36.0, 20.0),
    (-20.0, -22.0),
    (-22.0, -7.0),
    (-22.0, 7.0),
    (-20.0, 22.0),
    (-8.0, -8.0),
    (-8.0, 8.0),
];

const STIFFNESS: f64 = 0.15;
const DAMPING: f64 = 0.5;

fn triangle(phase: f64) -> f64 {
    // 0 → 1 → -1 → 0 over one unit of phase
    let p = phase.rem_euclid(1.0);
    if p < 0.25 {
        4.0 * p
    } else if p < 0.75 {
        2.0 - 4.0 * p
    } else {
        4.0 * p - 4.0
    }
}

struct Player {
    home: (f64, f64),
    pull: f64,
    pos: (f64, f64),
    vel: (f64, f64),
    goalie: bool,
}

/// Generates the trace in field metres, cycles `0..steps`.
pub fn generate(config: &SyntheticConfig) -> GameTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut players: Vec<Player> = Vec::with_capacity(OBJECT_COUNT - 1);
    for side in [1.0, -1.0] {
        for (i, &(hx, hy)) in HOME.iter().enumerate() {
            let goalie = i == 0;
            let jitter = if goalie { 0.0 } else { 2.0 };
            let home = (
                side * hx + rng.random_range(-1.0..=1.0) * jitter,
                hy + rng.random_range(-1.0..=1.0) * jitter,
            );
            players.push(Player {
                home,
                pull: if goalie { 0.0 } else { rng.random_range(0.2..0.45) },
                pos: home,
                vel: (0.0, 0.0),
                goalie,
            });
        }
    }

    let period = config.ball_period.max(2) as f64;
    let mut states = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        let phase = t as f64 / period;
        let ball = (
            config.ball_reach * triangle(phase),
            18.0 * (std::f64::consts::TAU * phase + 0.6).sin(),
        );
        let mut positions = [0.0; POSITION_DIM];
        positions[ObjectId::BALL.x_index()] = ball.0;
        positions[ObjectId::BALL.y_index()] = ball.1;

        for (i, p) in players.iter_mut().enumerate() {
            let target = if p.goalie {
                (p.home.0, (0.4 * ball.1).clamp(-7.0, 7.0))
            } else {
                (
                    p.home.0 + p.pull * (ball.0 - p.home.0),
                    p.home.1 + p.pull * (ball.1 - p.home.1),
                )
            };
            p.vel.0 += -STIFFNESS * (p.pos.0 - target.0) - DAMPING * p.vel.0;
            p.vel.1 += -STIFFNESS * (p.pos.1 - target.1) - DAMPING * p.vel.1;
            p.pos.0 = (p.pos.0 + p.vel.0).clamp(-52.0, 52.0);
            p.pos.1 = (p.pos.1 + p.vel.1).clamp(-33.0, 33.0);
            let id = ObjectId(i + 1);
            positions[id.x_index()] = p.pos.0;
            positions[id.y_index()] = p.pos.1;
        }
        states.push(WorldState {
            cycle: t as i64,
            positions,
        });
    }
    GameTrace::new(
        states,
        TraceMetadata {
            left_team: Some("SynthLeft".into()),
            right_team: Some("SynthRight".into()),
            source: Some(format!("synthetic-{}-{}", config.steps, config.seed)),
        },
    )
    .expect("generator emits increasing cycles")
}
