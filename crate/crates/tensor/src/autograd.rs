//! Reverse-mode driver.
//!
//! Tensor ids are handed out in creation order and an operation's output is
//! always created after its inputs, so visiting graph nodes by decreasing id
//! is a valid reverse topological order.

use std::collections::{HashMap, HashSet};

use crate::error::{Result, TensorError};
use crate::tensor::{set_grad_enabled, Tensor};

fn collect_graph(root: &Tensor) -> Vec<Tensor> {
    let mut seen = HashSet::new();
    let mut stack = vec![root.clone()];
    let mut nodes = Vec::new();
    while let Some(t) = stack.pop() {
        if !t.requires_grad() || !seen.insert(t.id()) {
            continue;
        }
        if let Some(node) = t.node() {
            stack.extend(node.inputs.iter().cloned());
        }
        nodes.push(t);
    }
    nodes.sort_by_key(Tensor::id);
    nodes
}

/// Gradients of a scalar `output` with respect to each tensor in `inputs`.
///
/// Inputs the output does not depend on get a zero gradient. With
/// `create_graph` the returned gradients are themselves differentiable.
pub fn grad(output: &Tensor, inputs: &[Tensor], create_graph: bool) -> Result<Vec<Tensor>> {
    if !output.requires_grad() {
        return Err(TensorError::DetachedGraph);
    }
    if output.numel() != 1 {
        return Err(TensorError::invalid(
            "grad",
            format!("output must be a scalar, got shape {:?}", output.shape()),
        ));
    }
    let nodes = collect_graph(output);
    let targets: HashSet<u64> = inputs.iter().map(Tensor::id).collect();

    // A node is relevant when some target is reachable from it.
    let mut relevant: HashSet<u64> = HashSet::new();
    for t in &nodes {
        let hit = targets.contains(&t.id())
            || t.node()
                .is_some_and(|n| n.inputs.iter().any(|i| relevant.contains(&i.id())));
        if hit {
            relevant.insert(t.id());
        }
    }

    let _mode = set_grad_enabled(create_graph);
    let mut grads: HashMap<u64, Tensor> = HashMap::new();
    grads.insert(output.id(), Tensor::ones(output.shape()));

    for t in nodes.iter().rev() {
        let Some(node) = t.node() else { continue };
        if !relevant.contains(&t.id()) {
            continue;
        }
        let g = if targets.contains(&t.id()) {
            grads.get(&t.id()).cloned()
        } else {
            grads.remove(&t.id())
        };
        let Some(g) = g else { continue };
        let needs: Vec<bool> = node
            .inputs
            .iter()
            .map(|i| i.requires_grad() && relevant.contains(&i.id()))
            .collect();
        if !needs.iter().any(|&b| b) {
            continue;
        }
        let input_grads = node.op.backward(&node.inputs, t, &g, &needs)?;
        for ((input, gi), need) in node.inputs.iter().zip(input_grads).zip(&needs) {
            let (Some(gi), true) = (gi, *need) else {
                continue;
            };
            let merged = match grads.remove(&input.id()) {
                Some(prev) => prev.add(&gi)?,
                None => gi,
            };
            grads.insert(input.id(), merged);
        }
    }

    Ok(inputs
        .iter()
        .map(|i| {
            grads
                .get(&i.id())
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(i.shape()))
        })
        .collect())
}

impl Tensor {
    /// Accumulates d(self)/d(leaf) into every trainable leaf of the graph.
    pub fn backward(&self) -> Result<()> {
        if !self.requires_grad() {
            return Err(TensorError::DetachedGraph);
        }
        let leaves: Vec<Tensor> = collect_graph(self)
            .into_iter()
            .filter(Tensor::is_leaf)
            .collect();
        let grads = grad(self, &leaves, false)?;
        for (leaf, g) in leaves.iter().zip(grads) {
            leaf.accumulate_grad(g)?;
        }
        Ok(())
    }
}
