use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Computes one optional gradient per op input from the output gradient.
pub(crate) type BackwardFn<T> = Box<dyn Fn(&Backprop<'_, T>) -> Vec<Option<Tensor<T>>>>;

/// What a backward rule can see when it runs.
pub(crate) struct Backprop<'a, T: Scalar> {
    pub grad: &'a Tensor<T>,
    pub output: &'a Tensor<T>,
    pub inputs: &'a [Var<T>],
}

impl<T: Scalar> Backprop<'_, T> {
    /// Whether input `i` wants a gradient; rules skip the work otherwise.
    pub fn needs(&self, i: usize) -> bool {
        self.inputs[i].requires_grad()
    }

    pub fn input(&self, i: usize) -> &Tensor<T> {
        self.inputs[i].value()
    }
}

struct OpRecord<T: Scalar> {
    name: &'static str,
    inputs: Vec<Var<T>>,
    backward: BackwardFn<T>,
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    requires_grad: bool,
    op: Option<OpRecord<T>>,
}

/// A tensor value plus its (optional) place on the gradient tape.
///
/// Cloning a `Var` is cheap and shares the node. A `Var` is tracked when it is
/// a parameter leaf or was produced by an op with a tracked input; untracked
/// vars carry no tape link and cost nothing beyond their values.
#[derive(Clone)]
pub struct Var<T: Scalar = f32>(Rc<Node<T>>);

impl<T: Scalar> fmt::Debug for Var<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("op", &self.0.op.as_ref().map(|o| o.name))
            .field("requires_grad", &self.0.requires_grad)
            .field("value", &self.0.value)
            .finish()
    }
}

impl<T: Scalar> Var<T> {
    /// A value outside the tape.
    pub fn constant(value: Tensor<T>) -> Self {
        Var(Rc::new(Node {
            value,
            requires_grad: false,
            op: None,
        }))
    }

    /// A tracked leaf; backward reports its gradient.
    pub fn leaf(value: Tensor<T>) -> Self {
        Var(Rc::new(Node {
            value,
            requires_grad: true,
            op: None,
        }))
    }

    /// Records an op. The backward rule is dropped unless some input is tracked.
    pub(crate) fn from_op(
        name: &'static str,
        value: Tensor<T>,
        inputs: Vec<Var<T>>,
        backward: BackwardFn<T>,
    ) -> Self {
        if inputs.iter().any(Var::requires_grad) {
            Var(Rc::new(Node {
                value,
                requires_grad: true,
                op: Some(OpRecord {
                    name,
                    inputs,
                    backward,
                }),
            }))
        } else {
            Var::constant(value)
        }
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.0.value
    }

    pub fn shape(&self) -> &[usize] {
        self.0.value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// True when this var links into a tape (a tracked leaf or a recorded op).
    pub fn has_tape_link(&self) -> bool {
        self.0.requires_grad
    }

    /// Same values, no tape link: nothing upstream receives gradient through it.
    pub fn stop_gradient(&self) -> Self {
        if self.requires_grad() {
            Var::constant(self.0.value.clone())
        } else {
            self.clone()
        }
    }

    fn key(&self) -> usize {
        Rc::as_ptr(&self.0) as *const () as usize
    }

    /// Tracked nodes reachable from `self`, inputs before consumers.
    fn topo_order(&self) -> Vec<Var<T>> {
        let mut order = Vec::new();
        if !self.requires_grad() {
            return order;
        }
        let mut visited = HashSet::new();
        visited.insert(self.key());
        let mut stack: Vec<(Var<T>, usize)> = vec![(self.clone(), 0)];
        while let Some(top) = stack.last_mut() {
            let next = top
                .0
                 .0
                .op
                .as_ref()
                .and_then(|op| op.inputs.get(top.1))
                .cloned();
            match next {
                Some(child) => {
                    top.1 += 1;
                    if child.requires_grad() && visited.insert(child.key()) {
                        stack.push((child, 0));
                    }
                }
                None => {
                    let (done, _) = stack.pop().expect("stack is non-empty");
                    order.push(done);
                }
            }
        }
        order
    }

    /// Number of recorded ops that a backward pass from here would visit.
    pub fn tape_len(&self) -> usize {
        self.topo_order()
            .iter()
            .filter(|v| v.0.op.is_some())
            .count()
    }

    /// Reverse-mode sweep from a scalar loss.
    ///
    /// Each reachable op runs its backward rule exactly once, in reverse
    /// topological order. Leaves that are not reachable get no entry, which
    /// [`Gradients::wrt`] reports as exact zeros.
    pub fn backward(&self) -> Result<Gradients<T>> {
        if self.value().len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::Contract(
                "backward called on a value that is not on an active tape".into(),
            ));
        }
        let order = self.topo_order();
        let mut pending: HashMap<usize, Tensor<T>> = HashMap::new();
        pending.insert(self.key(), Tensor::ones(self.shape()));
        let mut leaves = HashMap::new();

        for var in order.iter().rev() {
            let Some(grad) = pending.remove(&var.key()) else {
                continue;
            };
            let Some(op) = &var.0.op else {
                leaves.insert(var.key(), (var.clone(), grad));
                continue;
            };
            let ctx = Backprop {
                grad: &grad,
                output: &var.0.value,
                inputs: &op.inputs,
            };
            let input_grads = (op.backward)(&ctx);
            debug_assert_eq!(input_grads.len(), op.inputs.len(), "{}", op.name);
            for (input, g) in op.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !input.requires_grad() {
                    continue;
                }
                debug_assert_eq!(g.shape(), input.shape(), "grad shape from {}", op.name);
                match pending.get_mut(&input.key()) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        pending.insert(input.key(), g);
                    }
                }
            }
        }
        Ok(Gradients { leaves })
    }
}

/// Gradients of a loss with respect to the tracked leaves it reached.
pub struct Gradients<T: Scalar = f32> {
    leaves: HashMap<usize, (Var<T>, Tensor<T>)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: &Var<T>) -> Option<&Tensor<T>> {
        self.leaves.get(&var.key()).map(|(_, g)| g)
    }

    /// Gradient for `var`, exactly zero when the loss never reached it.
    pub fn wrt(&self, var: &Var<T>) -> Tensor<T> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.shape()))
    }

    /// Number of leaves that received a gradient.
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}
