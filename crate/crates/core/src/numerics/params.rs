use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::tape::{Tape, Var};
use super::Tensor2D;
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParameterSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Slot {
    pub name: String,
    pub value: Tensor2D,
    pub grad: Tensor2D,
    pub first_moment: Tensor2D,
    pub second_moment: Tensor2D,
}

/// Named parameters with their gradient buffers and Adam state.
///
/// Insertion order is significant: it is the checkpoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet {
    pub(crate) slots: Vec<Slot>,
    pub(crate) step: u64,
}

/// Tape variables for every parameter of one set, indexed by [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    #[inline]
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2D) -> ParamId {
        let name = name.into();
        assert!(
            self.find(&name).is_none(),
            "duplicate parameter name `{name}`"
        );
        let (r, c) = value.shape();
        self.slots.push(Slot {
            name,
            value,
            grad: Tensor2D::zeros(r, c),
            first_moment: Tensor2D::zeros(r, c),
            second_moment: Tensor2D::zeros(r, c),
        });
        ParamId(self.slots.len() - 1)
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let value = Tensor2D::from_fn(rows, cols, |_, _| dist.sample(rng));
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor2D::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.slots.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor2D {
        &self.slots[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.slots[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor2D {
        &self.slots[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.slots[id.0].grad
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn scalar_count(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    /// Registers every parameter as a leaf on `tape` without copying.
    pub fn bind<'a>(&'a self, tape: &mut Tape<'a>) -> Bound {
        Bound {
            vars: self.slots.iter().map(|s| tape.param(&s.value)).collect(),
        }
    }

    /// Adds the gradients that `tape`'s backward pass left on `bound`'s
    /// leaves into this set's gradient buffers.
    pub fn accumulate(&mut self, bound: &Bound, grads: &super::tape::Gradients) {
        for (slot, var) in self.slots.iter_mut().zip(&bound.vars) {
            if let Some(g) = grads.get(*var) {
                slot.grad.add_assign(g);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for s in &mut self.slots {
            s.grad.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.slots
            .iter()
            .map(|s| s.grad.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Fails with the first parameter whose gradient is not finite.
    pub fn check_grads(&self) -> Result<()> {
        match self.slots.iter().find(|s| !s.grad.is_finite()) {
            Some(s) => Err(Error::NonFiniteGradient(s.name.clone())),
            None => Ok(()),
        }
    }

    /// Flattened parameter values in checkpoint order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.value.data().iter().copied())
            .collect()
    }

    pub(crate) fn slots(&self) -> &[Slot] {
        &self.slots
    }
}
