use super::{
    check_actions, check_horizon, derive_seed, ActionVector, EnvDescriptor, EnvError,
    Environment, RewardVector, State,
};

const SIDE: usize = 4;
const GOAL: (usize, usize) = (3, 3);

/// Moves on the 4×4 grid, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];
}

/// 4×4 deterministic grid: start at (0,0), reward +1 on entering the goal
/// at (3,3). Cells are `(x, y)` with `y` growing downwards; moves that
/// would leave the grid keep the agent in place.
#[derive(Debug, Clone)]
pub struct GridWorld {
    desc: EnvDescriptor,
    seed: u64,
    clones: u64,
    cell: (usize, usize),
    steps: usize,
    done: bool,
}

impl GridWorld {
    pub const DEFAULT_HORIZON: usize = 100;
    pub const NUM_CELLS: usize = SIDE * SIDE;

    pub fn new(seed: u64) -> Self {
        Self::with_horizon(seed, Self::DEFAULT_HORIZON).expect("default horizon is valid")
    }

    pub fn with_horizon(seed: u64, horizon: usize) -> Result<Self, EnvError> {
        check_horizon(horizon)?;
        Ok(Self {
            desc: EnvDescriptor {
                num_agents: 1,
                num_objectives: 1,
                action_space: vec![4],
                state_dim: Self::NUM_CELLS,
                fully_observable: true,
                deterministic: true,
                discrete_states: Some(Self::NUM_CELLS),
                max_steps: horizon,
            },
            seed,
            clones: 0,
            cell: (0, 0),
            steps: 0,
            done: false,
        })
    }

    pub fn cell(&self) -> (usize, usize) {
        self.cell
    }

    pub fn cell_index((x, y): (usize, usize)) -> usize {
        y * SIDE + x
    }

    pub fn index_cell(index: usize) -> (usize, usize) {
        (index % SIDE, index / SIDE)
    }

    /// Pure transition rule: next cell, reward, and whether the goal was hit.
    pub fn transition(cell: (usize, usize), action: GridAction) -> ((usize, usize), f64, bool) {
        let (x, y) = cell;
        let next = match action {
            GridAction::Up => (x, y.saturating_sub(1)),
            GridAction::Down => (x, (y + 1).min(SIDE - 1)),
            GridAction::Left => (x.saturating_sub(1), y),
            GridAction::Right => ((x + 1).min(SIDE - 1), y),
        };
        let at_goal = next == GOAL;
        (next, if at_goal { 1.0 } else { 0.0 }, at_goal)
    }

    /// Places the agent on an arbitrary cell, keeping the step counter.
    pub fn set_cell(&mut self, cell: (usize, usize)) {
        assert!(cell.0 < SIDE && cell.1 < SIDE, "cell off the grid");
        self.cell = cell;
        self.done = cell == GOAL || self.steps >= self.desc.max_steps;
    }

    fn observation(&self) -> State {
        let index = Self::cell_index(self.cell);
        let mut values = vec![0.0; Self::NUM_CELLS];
        values[index] = 1.0;
        State {
            values,
            agent_index: 0,
            discrete: Some(index),
        }
    }
}

impl Environment for GridWorld {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.desc
    }

    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        let mut copy = self.clone();
        copy.seed = derive_seed(self.seed, self.clones);
        copy.clones = 0;
        self.clones += 1;
        Ok(Box::new(copy))
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.cell = (0, 0);
        self.steps = 0;
        self.done = false;
        Ok(())
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        check_actions(&self.desc, actions)?;
        let action = GridAction::ALL[actions.0[0]];
        let (next, reward, at_goal) = Self::transition(self.cell, action);
        self.cell = next;
        self.steps += 1;
        self.done = at_goal || self.steps >= self.desc.max_steps;
        Ok(RewardVector(vec![reward]))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        Ok(vec![self.observation()])
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        Ok(self.done)
    }

    fn elapsed_steps(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(env: &mut GridWorld, a: GridAction) -> RewardVector {
        env.step(&ActionVector::single(a as usize)).unwrap()
    }

    #[test]
    fn reset_places_agent_at_origin() {
        let mut env = GridWorld::new(1);
        env.reset().unwrap();
        env.reset().unwrap();
        let s = env.get_state().unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].values.len(), 16);
        assert_eq!(s[0].values[0], 1.0);
        assert_eq!(s[0].values.iter().sum::<f64>(), 1.0);
        assert!(!env.is_terminal().unwrap());
    }

    #[test]
    fn right_from_origin_and_into_goal() {
        let mut env = GridWorld::new(1);
        env.reset().unwrap();
        assert_eq!(step(&mut env, GridAction::Right).0, vec![0.0]);
        assert_eq!(env.cell(), (1, 0));
        assert!(!env.is_terminal().unwrap());

        env.set_cell((2, 3));
        assert_eq!(step(&mut env, GridAction::Right).0, vec![1.0]);
        assert_eq!(env.cell(), (3, 3));
        assert!(env.is_terminal().unwrap());
        assert!(matches!(
            env.step(&ActionVector::single(0)),
            Err(EnvError::StepAfterTerminal)
        ));
    }

    #[test]
    fn walls_keep_position() {
        let mut env = GridWorld::new(0);
        env.reset().unwrap();
        step(&mut env, GridAction::Up);
        step(&mut env, GridAction::Left);
        assert_eq!(env.cell(), (0, 0));
    }

    #[test]
    fn invalid_action_rejected() {
        let mut env = GridWorld::new(0);
        env.reset().unwrap();
        assert!(matches!(
            env.step(&ActionVector::single(4)),
            Err(EnvError::InvalidAction { action: 4, .. })
        ));
        assert!(matches!(
            env.step(&ActionVector(vec![0, 1])),
            Err(EnvError::WrongActionCount { .. })
        ));
    }

    #[test]
    fn horizon_terminates_episode() {
        let mut env = GridWorld::with_horizon(0, 3).unwrap();
        env.reset().unwrap();
        for _ in 0..3 {
            assert!(!env.is_terminal().unwrap());
            step(&mut env, GridAction::Up);
        }
        assert!(env.is_terminal().unwrap());
        assert_eq!(env.elapsed_steps(), 3);
    }

    #[test]
    fn clone_is_independent_and_identical() {
        let mut a = GridWorld::new(7);
        a.reset().unwrap();
        let mut b = a.clone_env().unwrap();
        let script = [3, 3, 1, 0, 1, 1, 3];
        for &act in &script {
            let ra = a.step(&ActionVector::single(act)).unwrap();
            let rb = b.step(&ActionVector::single(act)).unwrap();
            assert_eq!(ra, rb);
            assert_eq!(a.get_state().unwrap(), b.get_state().unwrap());
        }
        let before = b.get_state().unwrap();
        a.reset().unwrap();
        assert_eq!(b.get_state().unwrap(), before);
    }
}
