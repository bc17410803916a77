use super::{
    ActionVector, EnvDescriptor, EnvError, Environment, GridRender, RewardVector, State,
};

/// Exposes a single objective of a multi-objective environment.
pub struct SelectObjective {
    inner: Box<dyn Environment>,
    objective: usize,
    desc: EnvDescriptor,
}

impl SelectObjective {
    pub fn new(inner: Box<dyn Environment>, objective: usize) -> Result<Self, EnvError> {
        let mut desc = inner.descriptor().clone();
        if objective >= desc.num_objectives {
            return Err(EnvError::InvalidParameter {
                key: "objective".into(),
                reason: format!("{objective} >= {}", desc.num_objectives),
            });
        }
        desc.num_objectives = 1;
        Ok(Self {
            inner,
            objective,
            desc,
        })
    }
}

impl Environment for SelectObjective {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.desc
    }

    fn clone_env(&mut self) -> Result<Box<dyn Environment>, EnvError> {
        let inner = self.inner.clone_env()?;
        Ok(Box::new(SelectObjective::new(inner, self.objective)?))
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.inner.reset()
    }

    fn step(&mut self, actions: &ActionVector) -> Result<RewardVector, EnvError> {
        let all = self.inner.step(actions)?;
        Ok(RewardVector(vec![all.0[self.objective]]))
    }

    fn get_state(&mut self) -> Result<Vec<State>, EnvError> {
        self.inner.get_state()
    }

    fn is_terminal(&mut self) -> Result<bool, EnvError> {
        self.inner.is_terminal()
    }

    fn elapsed_steps(&self) -> usize {
        self.inner.elapsed_steps()
    }

    fn supports_human_slots(&self) -> bool {
        self.inner.supports_human_slots()
    }

    fn human_agents(&self) -> Vec<usize> {
        self.inner.human_agents()
    }

    fn render(&self) -> Option<GridRender> {
        self.inner.render()
    }
}
