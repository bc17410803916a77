use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    check_horizon, derive_seed, ActionVector, EnvDescriptor, EnvError, Environment, GridCell,
    GridRender, RewardVector, State,
};

const SIZE: usize = 11;
const SPAWN_EVERY: usize = 20;
const MAX_ENEMIES: usize = 5;
const ENEMY_FIRE_COOLDOWN: usize = 4;
const AGENT_FEATURES: usize = 7;

/// Per-tick tank commands, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TankAction {
    NoOp = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
    Fire = 5,
}

impl TankAction {
    pub const COUNT: usize = 6;

    pub fn from_index(index: usize) -> Option<Self> {
        use TankAction::*;
        [NoOp, Up, Down, Left, Right, Fire].get(index).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Facing {
    Up,
    Down,
    Left,
    Right,
}

impl Facing {
    fn delta(self) -> (isize, isize) {
        match self {
            Facing::Up => (0, -1),
            Facing::Down => (0, 1),
            Facing::Left => (-1, 0),
            Facing::Right => (1, 0),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone)]
struct Tank {
    x: usize,
    y: usize,
    facing: Facing,
    alive: bool,
    cooldown: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Friendly(usize),
    Enemy(usize),
}

/// Team tank game on an 11×11 grid.
///
/// Friendly tanks start on the bottom row. Enemy tanks appear on the top
/// row at reset and every 20 ticks while fewer than 5 are alive, then chase
/// the nearest friendly and fire when lined up with a clear shot. Shots are
/// instantaneous along the shooter's facing and destroy the first tank in
/// their path. The single team objective scores +1 per enemy and -1 per
/// friendly destroyed.
#[derive(Debug, Clone)]
pub struct TankBattle {
    desc: EnvDescriptor,
    seed: u64,
    clones: u64,
    rng: ChaCha8Rng,
    spawn_enemies: bool,
    friendlies: Vec<Tank>,
    enemies: Vec<Tank>,
    traces: Vec<(usize, usize)>,
    score: f64,
    steps: usize,
    done: bool,
}

impl TankBattle {
    pub const DEFAULT_HORIZON: usize = 500;
    pub const SIZE: usize = SIZE;

    pub fn new(seed: u64, agents: usize) -> Result<Self, EnvError> {
        Self::with_options(seed, agents, Self::DEFAULT_HORIZON, true)
    }

    pub fn with_options(
        seed: u64,
        agents: usize,
        horizon: usize,
        spawn_enemies: bool,
    ) -> Result<Self, EnvError> {
        check_horizon(horizon)?;
        if agents == 0 || agents > SIZE {
            return Err(EnvError::InvalidParameter {
                key: "agents".into(),
                reason: format!("must be in [1, {SIZE}]"),
            });
        }
        let mut env = Self {
            desc: EnvDescriptor {
                num_agents: agents,
                num_objectives: 1,
                action_space: vec![TankAction::COUNT; agents],
                state_dim: 2 * SIZE * SIZE + AGENT_FEATURES * agents,
                fully_observable: true,
                deterministic: false,
                discrete_states: None,
                max_steps: horizon,
            },
            seed,
            clones: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spawn_enemies,
            friendlies: Vec::new(),
            enemies: Vec::new(),
            traces: Vec::new(),
            score: 0.0,
            steps: 0,
            done: false,
        };
        env.reset()?;
        Ok(env)
    }

    pub fn alive_enemies(&self) -> usize {
        self.enemies.iter().filter(|t| t.alive).count()
    }

    pub fn alive_friendlies(&self) -> usize {
        self.friendlies.iter().filter(|t| t.alive).count()
    }

    pub fn friendly_position(&self, agent: usize) -> Option<(usize, usize)> {
        self.friendlies
            .get(agent)
            .filter(|t| t.alive)
            .map(|t| (t.x, t.y))
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    fn occupant(&self, x: usize, y: usize) -> Option<Side> {
        if let Some(i) = self
            .friendlies
            .iter()
            .position(|t| t.alive && t.x == x && t.y == y)
        {
            return Some(Side::Friendly(i));
        }
        self.enemies
            .iter()
            .position(|t| t.alive && t.x == x && t.y == y)
            .map(Side::Enemy)
    }

    fn offset(x: usize, y: usize, facing: Facing) -> Option<(usize, usize)> {
        let (dx, dy) = facing.delta();
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if (0..SIZE as isize).contains(&nx) && (0..SIZE as isize).contains(&ny) {
            Some((nx as usize, ny as usize))
        } else {
            None
        }
    }

    fn tank_mut(&mut self, side: Side) -> &mut Tank {
        match side {
            Side::Friendly(i) => &mut self.friendlies[i],
            Side::Enemy(i) => &mut self.enemies[i],
        }
    }

    fn try_move(&mut self, who: Side, facing: Facing) {
        let (x, y) = {
            let t = self.tank_mut(who);
            t.facing = facing;
            (t.x, t.y)
        };
        if let Some((nx, ny)) = Self::offset(x, y, facing) {
            if self.occupant(nx, ny).is_none() {
                let t = self.tank_mut(who);
                t.x = nx;
                t.y = ny;
            }
        }
    }

    /// Fires along the shooter's facing; returns the tank destroyed, if any.
    fn fire(&mut self, who: Side) -> Option<Side> {
        let (mut x, mut y, facing) = {
            let t = self.tank_mut(who);
            (t.x, t.y, t.facing)
        };
        while let Some((nx, ny)) = Self::offset(x, y, facing) {
            self.traces.push((nx, ny));
            if let Some(hit) = self.occupant(nx, ny) {
                self.tank_mut(hit).alive = false;
                return Some(hit);
            }
            x = nx;
            y = ny;
        }
        None
    }

    fn clear_line(&self, from: (usize, usize), to: (usize, usize)) -> Option<Facing> {
        let facing = if from.0 == to.0 {
            if to.1 < from.1 {
                Facing::Up
            } else {
                Facing::Down
            }
        } else if from.1 == to.1 {
            if to.0 < from.0 {
                Facing::Left
            } else {
                Facing::Right
            }
        } else {
            return None;
        };
        let (mut x, mut y) = from;
        while let Some((nx, ny)) = Self::offset(x, y, facing) {
            if (nx, ny) == to {
                return Some(facing);
            }
            if self.occupant(nx, ny).is_some() {
                return None;
            }
            x = nx;
            y = ny;
        }
        None
    }

    fn enemy_turn(&mut self, index: usize) -> Option<Side> {
        let enemy = self.enemies[index].clone();
        let target = self
            .friendlies
            .iter()
            .filter(|t| t.alive)
            .min_by_key(|t| t.x.abs_diff(enemy.x) + t.y.abs_diff(enemy.y))
            .map(|t| (t.x, t.y))?;
        if enemy.cooldown > 0 {
            self.enemies[index].cooldown -= 1;
        }
        if let Some(facing) = self.clear_line((enemy.x, enemy.y), target) {
            if enemy.cooldown == 0 {
                let t = &mut self.enemies[index];
                t.facing = facing;
                t.cooldown = ENEMY_FIRE_COOLDOWN;
                return self.fire(Side::Enemy(index));
            }
            return None;
        }
        let dx = target.0 as isize - enemy.x as isize;
        let dy = target.1 as isize - enemy.y as isize;
        let horizontal = if dx < 0 { Facing::Left } else { Facing::Right };
        let vertical = if dy < 0 { Facing::Up } else { Facing::Down };
        let order = if dx.abs() >= dy.abs() {
            [(horizontal, dx != 0), (vertical, dy != 0)]
        } else {
            [(vertical, dy != 0), (horizontal, dx != 0)]
        };
        for (facing, useful) in order {
            if !useful {
                continue;
            }
            let before = (enemy.x, enemy.y);
            self.try_move(Side::Enemy(index), facing);
            let t = &self.enemies[index];
            if (t.x, t.y) != before {
                break;
            }
        }
        None
    }

    fn spawn_enemy(&mut self) {
        if !self.spawn_enemies || self.alive_enemies() >= MAX_ENEMIES {
            return;
        }
        let free: Vec<usize> = (0..SIZE).filter(|&x| self.occupant(x, 0).is_none()).collect();
        if let Some(&x) = free.choose(&mut self.rng) {
            self.enemies.retain(|t| t.alive);
            self.enemies.push(Tank {
                x,
                y: 0,
                facing: Facing::Down,
                alive: true,
                cooldown: ENEMY_FIRE_COOLDOWN,
            });
        }
    }

    fn observation(&self) -> Vec<f64> {
        let cells = SIZE * SIZE;
        let mut v = vec![0.0; self.desc.state_dim];
        for t in self.friendlies.iter().filter(|t| t.alive) {
            v[t.y * SIZE + t.x] = 1.0;
        }
        for t in self.enemies.iter().filter(|t| t.alive) {
            v[cells + t.y * SIZE + t.x] = 1.0;
        }
        let scale = (SIZE - 1) as f64;
        for (i, t) in self.friendlies.iter().enumerate() {
            let base = 2 * cells + i * AGENT_FEATURES;
            v[base] = t.x as f64 / scale;
            v[base + 1] = t.y as f64 / scale;
            v[base + 2 + t.facing.index()] = 1.0;
            v[base + 6] = if t.alive { 1.0 } else { 0.0 };
        }
        v
    }
}

impl Environment for TankBattle {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.desc
    }

    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        let seed = derive_seed(self.seed, self.clones);
        self.clones += 1;
        let mut copy = self.clone();
        copy.seed = seed;
        copy.clones = 0;
        copy.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Box::new(copy))
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        let n = self.desc.num_agents;
        self.friendlies = (0..n)
            .map(|i| Tank {
                x: (i + 1) * SIZE / (n + 1),
                y: SIZE - 1,
                facing: Facing::Up,
                alive: true,
                cooldown: 0,
            })
            .collect();
        self.enemies.clear();
        self.traces.clear();
        self.score = 0.0;
        self.steps = 0;
        self.done = false;
        self.spawn_enemy();
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        if actions.len() != self.desc.num_agents {
            return Err(EnvError::WrongActionCount {
                expected: self.desc.num_agents,
                got: actions.len(),
            });
        }
        // Dead tanks ignore their action, valid or not.
        for (agent, &action) in actions.0.iter().enumerate() {
            if self.friendlies[agent].alive && action >= TankAction::COUNT {
                return Err(EnvError::InvalidAction {
                    agent,
                    action,
                    limit: TankAction::COUNT,
                });
            }
        }
        self.traces.clear();
        let mut kills = Vec::new();
        for (agent, &action) in actions.0.iter().enumerate() {
            if !self.friendlies[agent].alive {
                continue;
            }
            let who = Side::Friendly(agent);
            match TankAction::from_index(action).expect("validated above") {
                TankAction::NoOp => {}
                TankAction::Up => self.try_move(who, Facing::Up),
                TankAction::Down => self.try_move(who, Facing::Down),
                TankAction::Left => self.try_move(who, Facing::Left),
                TankAction::Right => self.try_move(who, Facing::Right),
                TankAction::Fire => kills.extend(self.fire(who)),
            }
        }
        for index in 0..self.enemies.len() {
            if self.enemies[index].alive {
                kills.extend(self.enemy_turn(index));
            }
        }
        let reward: f64 = kills
            .iter()
            .map(|k| match k {
                Side::Enemy(_) => 1.0,
                Side::Friendly(_) => -1.0,
            })
            .sum();
        self.score += reward;
        self.steps += 1;
        if self.steps.is_multiple_of(SPAWN_EVERY) {
            self.spawn_enemy();
        }
        self.done = self.alive_friendlies() == 0 || self.steps >= self.desc.max_steps;
        Ok(RewardVector(vec![reward]))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        let values = self.observation();
        Ok((0..self.desc.num_agents)
            .map(|agent_index| State {
                values: values.clone(),
                agent_index,
                discrete: None,
            })
            .collect())
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        Ok(self.done)
    }

    fn elapsed_steps(&self) -> usize {
        self.steps
    }

    fn supports_human_slots(&self) -> bool {
        true
    }

    fn render(&self) -> Option<GridRender> {
        let mut cells = vec![GridCell::Empty; SIZE * SIZE];
        for &(x, y) in &self.traces {
            cells[y * SIZE + x] = GridCell::Trace;
        }
        for t in self.enemies.iter().filter(|t| t.alive) {
            cells[t.y * SIZE + t.x] = GridCell::Enemy;
        }
        for (i, t) in self.friendlies.iter().enumerate().filter(|(_, t)| t.alive) {
            cells[t.y * SIZE + t.x] = GridCell::Friendly(i);
        }
        Some(GridRender {
            width: SIZE,
            height: SIZE,
            cells,
            score: self.score,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(env: &mut TankBattle, actions: &[usize]) -> f64 {
        env.step(&ActionVector(actions.to_vec())).unwrap().0[0]
    }

    #[test]
    fn fully_observable_states_are_identical() {
        let mut env = TankBattle::new(4, 2).unwrap();
        for t in 0..60 {
            let states = env.get_state().unwrap();
            assert_eq!(states.len(), 2);
            assert_eq!(states[0].values, states[1].values);
            assert_eq!(states[0].values.len(), env.descriptor().state_dim);
            if env.is_terminal().unwrap() {
                break;
            }
            act(&mut env, &[t % 6, (t + 3) % 6]);
        }
    }

    #[test]
    fn firing_straight_up_hits_enemy_in_column() {
        let mut env = TankBattle::with_options(0, 1, 500, false).unwrap();
        let (x, _) = env.friendly_position(0).unwrap();
        env.enemies.push(Tank {
            x,
            y: 2,
            facing: Facing::Down,
            alive: true,
            cooldown: 99,
        });
        assert_eq!(act(&mut env, &[TankAction::Fire as usize]), 1.0);
        assert_eq!(env.alive_enemies(), 0);
        assert_eq!(env.score(), 1.0);
    }

    #[test]
    fn friendly_fire_costs_a_point() {
        let mut env = TankBattle::with_options(0, 2, 500, false).unwrap();
        // Agent 0 turns right and shoots agent 1 on the same row.
        env.friendlies[0].facing = Facing::Right;
        let r = act(&mut env, &[TankAction::Fire as usize, TankAction::NoOp as usize]);
        assert_eq!(r, -1.0);
        assert_eq!(env.alive_friendlies(), 1);
        // A dead tank ignores even out-of-range actions.
        act(&mut env, &[TankAction::NoOp as usize, 42]);
    }

    #[test]
    fn invalid_action_for_living_tank() {
        let mut env = TankBattle::new(0, 2).unwrap();
        assert!(matches!(
            env.step(&ActionVector(vec![6, 0])),
            Err(EnvError::InvalidAction { agent: 0, .. })
        ));
    }

    #[test]
    fn enemies_spawn_on_schedule_and_cap_at_five() {
        let mut env = TankBattle::with_options(9, 1, 500, true).unwrap();
        assert_eq!(env.alive_enemies(), 1);
        for _ in 0..10 {
            env.spawn_enemy();
        }
        assert_eq!(env.alive_enemies(), MAX_ENEMIES);

        // Enemies on a quiet board: one more appears at tick 20.
        let mut env = TankBattle::with_options(9, 1, 500, true).unwrap();
        env.enemies[0].alive = false;
        for _ in 0..19 {
            act(&mut env, &[0]);
        }
        assert_eq!(env.alive_enemies(), 0);
        act(&mut env, &[0]);
        assert_eq!(env.alive_enemies(), 1);
    }

    #[test]
    fn episode_ends_when_team_is_wiped() {
        let mut env = TankBattle::with_options(0, 1, 500, false).unwrap();
        env.friendlies[0].alive = false;
        act(&mut env, &[0]);
        assert!(env.is_terminal().unwrap());
    }

    #[test]
    fn render_marks_tanks() {
        let env = TankBattle::new(1, 2).unwrap();
        let r = env.render().unwrap();
        assert_eq!(r.cells.len(), 121);
        let friendlies = r
            .cells
            .iter()
            .filter(|c| matches!(c, GridCell::Friendly(_)))
            .count();
        assert_eq!(friendlies, 2);
        assert_eq!(r.cells.iter().filter(|c| **c == GridCell::Enemy).count(), 1);
    }

    #[test]
    fn horizon_is_respected() {
        let mut env = TankBattle::with_options(2, 1, 30, false).unwrap();
        let mut n = 0;
        while !env.is_terminal().unwrap() {
            act(&mut env, &[0]);
            n += 1;
        }
        assert_eq!(n, 30);
    }
}
