use std::cell::{Cell, Ref, RefCell};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::TensorError;

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording a backward graph. Intermediates are freed as
/// soon as they go out of scope, which is what makes full-night inference fit
/// in memory.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// What a backward closure sees: the upstream gradient, the op's output
/// values, and which parents actually need a gradient.
pub struct BackwardCtx<'a> {
    pub grad_out: &'a [f64],
    pub out: &'a [f64],
    pub needs: &'a [bool],
}

pub type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Vec<f64>>>>;

struct GradFn {
    name: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: usize,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

/// Dense row-major `f64` tensor with an optional backward-graph record.
/// Cloning is cheap and shares storage.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn build(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn>) -> Self {
        assert_eq!(data.len(), numel(&shape), "data length does not match shape {shape:?}");
        Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RefCell::new(data),
            grad: RefCell::new(None),
            requires_grad,
            grad_fn,
        }))
    }

    /// Constant tensor (no gradient).
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self, TensorError> {
        if data.len() != numel(shape) {
            return Err(TensorError::Shape(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Tensor::build(data, shape.to_vec(), false, None))
    }

    /// Trainable leaf.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Self, TensorError> {
        let t = Tensor::new(data, shape)?;
        Ok(Tensor::build(t.to_vec(), shape.to_vec(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::build(vec![0.0; numel(shape)], shape.to_vec(), false, None)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::build(vec![v], Vec::new(), false, None)
    }

    /// Result of a differentiable op. Parents that need no gradient are
    /// recorded only if some other parent does; under [`no_grad`] nothing is.
    pub fn from_op(
        name: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        if track {
            Tensor::build(data, shape, true, Some(GradFn { name, parents, backward }))
        } else {
            Tensor::build(data, shape, false, None)
        }
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.0.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.0.grad_fn.as_ref().map(|g| g.name)
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        let d = self.data();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.shape());
        d[0]
    }

    /// Overwrites the values in place; only meaningful for leaves.
    pub fn set_data(&self, values: &[f64]) {
        let mut d = self.0.data.borrow_mut();
        assert_eq!(d.len(), values.len());
        d.copy_from_slice(values);
    }

    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.0.data.borrow_mut());
    }

    /// Accumulated gradient, zero-filled if nothing has flowed here.
    pub fn grad(&self) -> Vec<f64> {
        self.0.grad.borrow().clone().unwrap_or_else(|| vec![0.0; self.numel()])
    }

    pub fn has_grad(&self) -> bool {
        self.0.grad.borrow().is_some()
    }

    pub fn scale_grad(&self, factor: f64) {
        if let Some(g) = self.0.grad.borrow_mut().as_mut() {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Tensor::build(self.to_vec(), self.0.shape.clone(), false, None)
    }

    fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode sweep from a one-element tensor. Leaf gradients
    /// accumulate across calls; intermediate gradients are not retained.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        let mut pending: HashMap<usize, Vec<f64>> = HashMap::new();
        pending.insert(self.id(), vec![1.0]);

        for node in order.iter().rev() {
            let Some(grad_out) = pending.remove(&node.id()) else { continue };
            let Some(gf) = &node.0.grad_fn else {
                node.accumulate_grad(&grad_out);
                continue;
            };
            let needs: Vec<bool> = gf.parents.iter().map(Tensor::requires_grad).collect();
            let grads = {
                let out = node.data();
                (gf.backward)(&BackwardCtx { grad_out: &grad_out, out: &out, needs: &needs })
            };
            debug_assert_eq!(grads.len(), gf.parents.len(), "{} backward arity", gf.name);
            for (parent, g) in gf.parents.iter().zip(grads) {
                let Some(g) = g else { continue };
                if !parent.requires_grad() {
                    continue;
                }
                debug_assert_eq!(g.len(), parent.numel(), "{} grad size", gf.name);
                match pending.get_mut(&parent.id()) {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    None => {
                        pending.insert(parent.id(), g);
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodes requiring grad, parents before children (iterative DFS).
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(gf) = &t.0.grad_fn {
                for p in gf.parents.iter().rev() {
                    if p.requires_grad() && !visited.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.data();
        let preview: Vec<f64> = d.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("op", &self.op_name())
            .field("data", &preview)
            .finish()
    }
}

/// A named trainable tensor.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, data: Vec<f64>, shape: &[usize]) -> Self {
        Parameter { name: name.into(), tensor: Tensor::param(data, shape).expect("parameter shape") }
    }
}
