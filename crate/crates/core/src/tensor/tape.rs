//! Reverse-mode recording of the network ops. A tape is single-use: one
//! forward recording, one backward pass.

use super::ops::BatchNormCache;
use super::*;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Pointwise {
        x: Var,
        w: Var,
        b: Var,
    },
    Depthwise {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    Add(Var, Var),
    Concat(Vec<Var>),
    Upsample {
        x: Var,
        factor: usize,
    },
    BatchNormTrain {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: BatchNormCache,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        mean: Vec<f64>,
        var: Vec<f64>,
        eps: f64,
    },
    L1 {
        pred: Var,
        target: Var,
    },
    WeightedSum {
        x: Var,
        weights: Tensor4,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor4,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Gradients of a scalar with respect to every node that needed one.
#[derive(Debug)]
pub struct Gradients {
    by_node: Vec<Option<Tensor4>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor4> {
        self.by_node.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor4, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn value(&self, v: Var) -> &Tensor4 {
        &self.nodes[v.0].value
    }

    /// Consumes the value of a node, e.g. the final output after backward.
    pub fn take_value(&mut self, v: Var) -> Tensor4 {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor4::zeros([0, 0, 0, 0]))
    }

    pub fn input(&mut self, value: Tensor4, requires_grad: bool) -> Var {
        self.push(value.detached(), Op::Input, requires_grad)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let entry = store.entry(id);
        self.push(entry.tensor.detached(), Op::Param(id), entry.trainable)
    }

    pub fn conv_pointwise(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = pointwise_forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::Pointwise { x, w, b }, rg))
    }

    pub fn conv_depthwise(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = depthwise_forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(y, Op::Depthwise { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = relu(self.value(x));
        let rg = self.rg(&[x]);
        self.push(y, Op::Relu(x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = add(self.value(a), self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(y, Op::Add(a, b), rg))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor4> = parts.iter().map(|&v| self.value(v)).collect();
        let y = concat_channels(&values)?;
        let rg = self.rg(parts);
        Ok(self.push(y, Op::Concat(parts.to_vec()), rg))
    }

    pub fn upsample_bicubic(&mut self, x: Var, factor: usize) -> Result<Var> {
        let y = upsample_bicubic(self.value(x), factor)?;
        let rg = self.rg(&[x]);
        Ok(self.push(y, Op::Upsample { x, factor }, rg))
    }

    /// Batch-statistics normalization. Returns the output and the batch
    /// mean/variance so callers can update running statistics.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let (y, cache) = batch_norm_train(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let (mean, var) = (cache.mean.clone(), cache.var.clone());
        let rg = self.rg(&[x, gamma, beta]);
        let v = self.push(y, Op::BatchNormTrain { x, gamma, beta, cache }, rg);
        Ok((v, mean, var))
    }

    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f64],
        running_var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        let y = batch_norm_eval(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            running_mean,
            running_var,
            eps,
        )?;
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(
            y,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                mean: running_mean.to_vec(),
                var: running_var.to_vec(),
                eps,
            },
            rg,
        ))
    }

    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let loss = l1_loss(self.value(pred), self.value(target))?;
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Tensor4::scalar(loss), Op::L1 { pred, target }, rg))
    }

    /// `sum(x * weights)`; reduces any op output to a scalar for checking.
    pub fn weighted_sum(&mut self, x: Var, weights: &Tensor4) -> Result<Var> {
        self.value(x).ensure_shape("weighted_sum", weights)?;
        let s = self
            .value(x)
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        let rg = self.rg(&[x]);
        Ok(self.push(
            Tensor4::scalar(s),
            Op::WeightedSum {
                x,
                weights: weights.detached(),
            },
            rg,
        ))
    }

    /// Gradients of the scalar `loss` with respect to every recorded node.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.backward_done {
            return Err(Error::BackwardAlreadyRun);
        }
        if self.value(loss).scalar_value().is_none() {
            return Err(Error::invalid(format!(
                "backward needs a scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor4>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor4::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let needs = |v: Var| self.nodes[v.0].requires_grad;
            let mut contributions: Vec<(Var, Tensor4)> = Vec::new();
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::Pointwise { x, w, b } | Op::Depthwise { x, w, b } => {
                    let depthwise = matches!(node.op, Op::Depthwise { .. });
                    let f = if depthwise {
                        depthwise_backward
                    } else {
                        pointwise_backward
                    };
                    let (gx, gw, gb) = f(self.value(*x), self.value(*w), &gy, needs(*x))?;
                    if let Some(gx) = gx {
                        contributions.push((*x, gx));
                    }
                    if needs(*w) {
                        contributions.push((*w, gw));
                    }
                    if needs(*b) {
                        contributions.push((*b, gb));
                    }
                }
                Op::Relu(x) => contributions.push((*x, relu_backward(self.value(*x), &gy))),
                Op::Add(a, b) => {
                    if needs(*a) {
                        contributions.push((*a, gy.detached()));
                    }
                    if needs(*b) {
                        contributions.push((*b, gy.detached()));
                    }
                }
                Op::Concat(parts) => {
                    let sizes: Vec<usize> = parts.iter().map(|&p| self.value(p).channels()).collect();
                    for (p, g) in parts.iter().zip(split_channels(&gy, &sizes)?) {
                        if needs(*p) {
                            contributions.push((*p, g));
                        }
                    }
                }
                Op::Upsample { x, factor } => {
                    let shape = self.value(*x).shape();
                    contributions.push((*x, upsample_bicubic_adjoint(&gy, shape, *factor)));
                }
                Op::BatchNormTrain { x, gamma, beta, cache } => {
                    let (gx, gg, gb) = batch_norm_backward_train(cache, self.value(*gamma), &gy);
                    contributions.extend([(*x, gx), (*gamma, gg), (*beta, gb)]);
                }
                Op::BatchNormEval {
                    x,
                    gamma,
                    beta,
                    mean,
                    var,
                    eps,
                } => {
                    let (gx, gg, gb) =
                        batch_norm_backward_eval(self.value(*x), self.value(*gamma), mean, var, *eps, &gy);
                    contributions.extend([(*x, gx), (*gamma, gg), (*beta, gb)]);
                }
                Op::L1 { pred, target } => {
                    let up = gy.data()[0];
                    let gp = l1_backward(self.value(*pred), self.value(*target), up);
                    if needs(*target) {
                        let neg = gp.data().iter().map(|v| -v).collect();
                        contributions.push((*target, Tensor4::from_vec(gp.shape(), neg)?));
                    }
                    contributions.push((*pred, gp));
                }
                Op::WeightedSum { x, weights } => {
                    let up = gy.data()[0];
                    let g = weights.data().iter().map(|w| w * up).collect();
                    contributions.push((*x, Tensor4::from_vec(weights.shape(), g)?));
                }
            }
            // leaves keep their gradient for the caller
            if matches!(node.op, Op::Input | Op::Param(_)) {
                grads[idx] = Some(gy);
            }
            for (v, g) in contributions {
                if !needs(v) {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        // Only leaves are kept; intermediate gradients were consumed above.
        for (idx, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Input | Op::Param(_)) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { by_node: grads })
    }

    pub(crate) fn param_grads<'a>(&'a self, grads: &'a Gradients) -> impl Iterator<Item = (ParamId, &'a Tensor4)> + 'a {
        self.nodes.iter().enumerate().filter_map(move |(i, n)| match n.op {
            Op::Param(id) => grads.by_node.get(i).and_then(|g| g.as_ref()).map(|g| (id, g)),
            _ => None,
        })
    }
}
