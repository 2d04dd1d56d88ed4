"""Reference epoch kernels for pairwise hinge training, plain numpy.

Both kernels walk a pre-drawn sequence of (company, positive tech, negative
tech) triples and apply one SGD step per triple: gradients are evaluated at
the current parameters, then every participating parameter is updated in
place. The triple order and the negative draws are decided by the caller,
so a given argument list produces exactly one trajectory.

Layer chains (the semantic projection and the MLP scorer) arrive as padded
stacks: weights[l, :dims[l+1], :dims[l]] and biases[l, :dims[l+1]] hold
layer l, mapping width dims[l] to dims[l+1]. `relu_hidden` rectifies every
layer output except the last.

The numba backend mirrors these functions signature for signature.
"""

from __future__ import annotations

import numpy as np


def chain_forward(x: np.ndarray, weights: np.ndarray, biases: np.ndarray,
                  dims: np.ndarray, relu_hidden: bool) -> list[np.ndarray]:
    """Activations [input, layer1 out, ..., final out] of the layer chain."""
    n_layers = len(dims) - 1
    acts = [x]
    h = x
    for layer in range(n_layers):
        z = weights[layer, :dims[layer + 1], :dims[layer]] @ h + biases[layer, :dims[layer + 1]]
        if relu_hidden and layer < n_layers - 1:
            z = np.maximum(z, 0.0)
        acts.append(z)
        h = z
    return acts


def chain_backward(acts: list[np.ndarray], weights: np.ndarray, dims: np.ndarray,
                   relu_hidden: bool, delta: np.ndarray,
                   grad_w: np.ndarray, grad_b: np.ndarray) -> np.ndarray:
    """Backpropagate `delta` (grad at the chain output) through the chain.

    Accumulates parameter gradients into grad_w/grad_b and returns the
    gradient at the chain input. Rectifier subgradient at 0 is taken as 0.
    """
    n_layers = len(dims) - 1
    for layer in range(n_layers - 1, -1, -1):
        rows, cols = dims[layer + 1], dims[layer]
        grad_w[layer, :rows, :cols] += np.outer(delta, acts[layer])
        grad_b[layer, :rows] += delta
        delta = weights[layer, :rows, :cols].T @ delta
        if relu_hidden and layer > 0:
            delta = delta * (acts[layer] > 0)
    return delta


def hinge_epoch_dot(C: np.ndarray, E: np.ndarray, S0: np.ndarray,
                    proj_w: np.ndarray, proj_b: np.ndarray, proj_dims: np.ndarray,
                    use_e: bool, use_proj: bool, proj_relu: bool,
                    pos_i: np.ndarray, pos_j: np.ndarray, neg_j: np.ndarray,
                    lr: float, margin: float) -> float:
    """One epoch for the dot-product variants.

    Tech representation t_j = (E[j] if use_e) + (proj(S0[j]) if use_proj);
    score = C[i] . t_j. Returns the summed hinge loss over the triples.
    """
    d = C.shape[1]
    total = 0.0
    for idx in range(len(pos_i)):
        i, j, k = pos_i[idx], pos_j[idx], neg_j[idx]
        t_pos = np.zeros(d)
        t_neg = np.zeros(d)
        if use_e:
            t_pos += E[j]
            t_neg += E[k]
        if use_proj:
            acts_pos = chain_forward(S0[j], proj_w, proj_b, proj_dims, proj_relu)
            acts_neg = chain_forward(S0[k], proj_w, proj_b, proj_dims, proj_relu)
            t_pos += acts_pos[-1]
            t_neg += acts_neg[-1]
        c_i = C[i]
        s_pos = float(c_i @ t_pos)
        s_neg = float(c_i @ t_neg)
        viol = margin - s_pos + s_neg
        if viol <= 0.0:
            continue
        total += viol
        c_old = c_i.copy()
        grad_c = t_neg - t_pos
        if use_proj:
            grad_w = np.zeros_like(proj_w)
            grad_b = np.zeros_like(proj_b)
            chain_backward(acts_pos, proj_w, proj_dims, proj_relu, -c_old, grad_w, grad_b)
            chain_backward(acts_neg, proj_w, proj_dims, proj_relu, c_old, grad_w, grad_b)
            proj_w -= lr * grad_w
            proj_b -= lr * grad_b
        if use_e:
            E[j] += lr * c_old
            E[k] -= lr * c_old
        C[i] -= lr * grad_c
    return total


def hinge_epoch_mlp(C: np.ndarray, E: np.ndarray,
                    mlp_w: np.ndarray, mlp_b: np.ndarray, mlp_dims: np.ndarray,
                    use_dot: bool,
                    pos_i: np.ndarray, pos_j: np.ndarray, neg_j: np.ndarray,
                    lr: float, margin: float) -> float:
    """One epoch for the scorer variants.

    score = mlp([C[i] || E[j]]) plus, when use_dot, the C[i] . E[j] term.
    The scorer has rectified hidden layers and a linear scalar output.
    Returns the summed hinge loss over the triples.
    """
    d = C.shape[1]
    total = 0.0
    for idx in range(len(pos_i)):
        i, j, k = pos_i[idx], pos_j[idx], neg_j[idx]
        x_pos = np.concatenate((C[i], E[j]))
        x_neg = np.concatenate((C[i], E[k]))
        acts_pos = chain_forward(x_pos, mlp_w, mlp_b, mlp_dims, True)
        acts_neg = chain_forward(x_neg, mlp_w, mlp_b, mlp_dims, True)
        s_pos = float(acts_pos[-1][0])
        s_neg = float(acts_neg[-1][0])
        if use_dot:
            s_pos += float(C[i] @ E[j])
            s_neg += float(C[i] @ E[k])
        viol = margin - s_pos + s_neg
        if viol <= 0.0:
            continue
        total += viol
        grad_w = np.zeros_like(mlp_w)
        grad_b = np.zeros_like(mlp_b)
        dx_pos = chain_backward(acts_pos, mlp_w, mlp_dims, True, np.array([-1.0]), grad_w, grad_b)
        dx_neg = chain_backward(acts_neg, mlp_w, mlp_dims, True, np.array([1.0]), grad_w, grad_b)
        c_old = C[i].copy()
        e_pos_old = E[j].copy()
        e_neg_old = E[k].copy()
        grad_c = dx_pos[:d] + dx_neg[:d]
        grad_e_pos = dx_pos[d:]
        grad_e_neg = dx_neg[d:]
        if use_dot:
            grad_c = grad_c + (e_neg_old - e_pos_old)
            grad_e_pos = grad_e_pos - c_old
            grad_e_neg = grad_e_neg + c_old
        mlp_w -= lr * grad_w
        mlp_b -= lr * grad_b
        C[i] -= lr * grad_c
        E[j] -= lr * grad_e_pos
        E[k] -= lr * grad_e_neg
    return total
