use std::collections::HashMap;

use crate::tensor::{set_grad_enabled, BackwardCtx};
use crate::Tensor;

/// Gradients of `output` with respect to each tensor in `wrt`.
///
/// `seed` is the cotangent of `output` (ones when `None`). With
/// `create_graph` the backward pass is itself recorded, so the returned
/// gradients can be differentiated again. Tensors in `wrt` that `output`
/// does not depend on get zero gradients.
pub fn grad(output: &Tensor, wrt: &[&Tensor], seed: Option<&Tensor>, create_graph: bool) -> Vec<Tensor> {
    let _mode = set_grad_enabled(create_graph);
    let targets: HashMap<u64, usize> = wrt.iter().enumerate().map(|(i, t)| (t.id(), i)).collect();

    let order = topo_order(output);
    // A node matters when some requested tensor is reachable from it.
    let mut needed: HashMap<u64, bool> = HashMap::with_capacity(order.len());
    for t in &order {
        let here = targets.contains_key(&t.id())
            || t.node().is_some_and(|n| n.inputs.iter().any(|i| needed.get(&i.id()).copied().unwrap_or(false)));
        needed.insert(t.id(), here);
    }

    let mut results: Vec<Option<Tensor>> = vec![None; wrt.len()];
    if needed.get(&output.id()).copied().unwrap_or(false) {
        let seed = match seed {
            Some(s) => {
                assert_eq!(s.shape(), output.shape(), "seed shape must match output");
                s.clone()
            }
            None => Tensor::ones(output.shape()),
        };
        let mut pending: HashMap<u64, Tensor> = HashMap::new();
        pending.insert(output.id(), seed);

        for t in order.iter().rev() {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            if let Some(&slot) = targets.get(&t.id()) {
                results[slot] = Some(g.clone());
            }
            let Some(node) = t.node() else {
                continue;
            };
            let needs: Vec<bool> = node
                .inputs
                .iter()
                .map(|i| i.requires_grad() && needed.get(&i.id()).copied().unwrap_or(false))
                .collect();
            if !needs.iter().any(|&b| b) {
                continue;
            }
            let ctx = BackwardCtx {
                inputs: &node.inputs,
                output: t,
                grad: &g,
                needs: &needs,
            };
            let grads = (node.backward)(&ctx);
            debug_assert_eq!(grads.len(), node.inputs.len(), "backward of {} returned wrong arity", node.op);
            for ((input, gi), &need) in node.inputs.iter().zip(grads).zip(&needs) {
                let Some(gi) = gi else { continue };
                if !need {
                    continue;
                }
                debug_assert_eq!(gi.shape(), input.shape(), "gradient shape from {}", node.op);
                match pending.remove(&input.id()) {
                    Some(acc) => pending.insert(input.id(), acc.add(&gi)),
                    None => pending.insert(input.id(), gi),
                };
            }
        }
    }

    results
        .into_iter()
        .zip(wrt)
        .map(|(g, t)| g.unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect()
}

/// Tensors reachable from `root` through tracked inputs, in post-order
/// (every tensor after all of its inputs).
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order = Vec::new();
    if !root.requires_grad() {
        return order;
    }
    let mut visited: HashMap<u64, ()> = HashMap::new();
    let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
    while let Some((t, expanded)) = stack.pop() {
        if expanded {
            order.push(t);
            continue;
        }
        if visited.insert(t.id(), ()).is_some() {
            continue;
        }
        stack.push((t.clone(), true));
        if let Some(node) = t.node() {
            for input in node.inputs.iter().rev() {
                if input.requires_grad() && !visited.contains_key(&input.id()) {
                    stack.push((input.clone(), false));
                }
            }
        }
    }
    order
}
