"""Compiled epoch kernels for pairwise hinge training.

Signature-compatible with the reference kernels; see that module for the
argument layout. Layer chains are evaluated with explicit loops over the
padded stacks because the layer count is a runtime value.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _chain_forward(x_row, acts, weights, biases, dims, relu_hidden):
    # acts: scratch (n_layers+1, width_max); fills row l with layer l activations
    n_layers = dims.shape[0] - 1
    for c in range(dims[0]):
        acts[0, c] = x_row[c]
    for layer in range(n_layers):
        rows = dims[layer + 1]
        cols = dims[layer]
        for r in range(rows):
            acc = biases[layer, r]
            for c in range(cols):
                acc += weights[layer, r, c] * acts[layer, c]
            if relu_hidden and layer < n_layers - 1 and acc < 0.0:
                acc = 0.0
            acts[layer + 1, r] = acc


@njit(cache=True)
def _chain_backward(acts, weights, dims, relu_hidden, delta, scratch, grad_w, grad_b):
    # delta holds the grad at the chain output on entry, the grad at the
    # chain input on exit; parameter grads accumulate into grad_w/grad_b
    n_layers = dims.shape[0] - 1
    for layer in range(n_layers - 1, -1, -1):
        rows = dims[layer + 1]
        cols = dims[layer]
        for r in range(rows):
            dr = delta[r]
            grad_b[layer, r] += dr
            for c in range(cols):
                grad_w[layer, r, c] += dr * acts[layer, c]
        for c in range(cols):
            acc = 0.0
            for r in range(rows):
                acc += weights[layer, r, c] * delta[r]
            if relu_hidden and layer > 0 and acts[layer, c] <= 0.0:
                acc = 0.0
            scratch[c] = acc
        for c in range(cols):
            delta[c] = scratch[c]


@njit(cache=True)
def _zero_grads(grad_w, grad_b, dims):
    n_layers = dims.shape[0] - 1
    for layer in range(n_layers):
        for r in range(dims[layer + 1]):
            grad_b[layer, r] = 0.0
            for c in range(dims[layer]):
                grad_w[layer, r, c] = 0.0


@njit(cache=True)
def hinge_epoch_dot(C, E, S0, proj_w, proj_b, proj_dims,
                    use_e, use_proj, proj_relu,
                    pos_i, pos_j, neg_j, lr, margin):
    d = C.shape[1]
    n_layers = proj_dims.shape[0] - 1
    width = 1
    for l in range(proj_dims.shape[0]):
        if proj_dims[l] > width:
            width = proj_dims[l]
    acts_pos = np.zeros((n_layers + 1, width))
    acts_neg = np.zeros((n_layers + 1, width))
    t_pos = np.zeros(d)
    t_neg = np.zeros(d)
    c_old = np.zeros(d)
    delta = np.zeros(width)
    scratch = np.zeros(width)
    grad_w = np.zeros_like(proj_w)
    grad_b = np.zeros_like(proj_b)
    total = 0.0
    for idx in range(pos_i.shape[0]):
        i = pos_i[idx]
        j = pos_j[idx]
        k = neg_j[idx]
        for a in range(d):
            t_pos[a] = 0.0
            t_neg[a] = 0.0
        if use_e:
            for a in range(d):
                t_pos[a] += E[j, a]
                t_neg[a] += E[k, a]
        if use_proj:
            _chain_forward(S0[j], acts_pos, proj_w, proj_b, proj_dims, proj_relu)
            _chain_forward(S0[k], acts_neg, proj_w, proj_b, proj_dims, proj_relu)
            for a in range(d):
                t_pos[a] += acts_pos[n_layers, a]
                t_neg[a] += acts_neg[n_layers, a]
        s_pos = 0.0
        s_neg = 0.0
        for a in range(d):
            s_pos += C[i, a] * t_pos[a]
            s_neg += C[i, a] * t_neg[a]
        viol = margin - s_pos + s_neg
        if viol <= 0.0:
            continue
        total += viol
        for a in range(d):
            c_old[a] = C[i, a]
        if use_proj:
            _zero_grads(grad_w, grad_b, proj_dims)
            for a in range(d):
                delta[a] = -c_old[a]
            _chain_backward(acts_pos, proj_w, proj_dims, proj_relu, delta, scratch, grad_w, grad_b)
            for a in range(d):
                delta[a] = c_old[a]
            _chain_backward(acts_neg, proj_w, proj_dims, proj_relu, delta, scratch, grad_w, grad_b)
            for layer in range(n_layers):
                for r in range(proj_dims[layer + 1]):
                    proj_b[layer, r] -= lr * grad_b[layer, r]
                    for c in range(proj_dims[layer]):
                        proj_w[layer, r, c] -= lr * grad_w[layer, r, c]
        if use_e:
            for a in range(d):
                E[j, a] += lr * c_old[a]
                E[k, a] -= lr * c_old[a]
        for a in range(d):
            C[i, a] -= lr * (t_neg[a] - t_pos[a])
    return total


@njit(cache=True)
def hinge_epoch_mlp(C, E, mlp_w, mlp_b, mlp_dims, use_dot,
                    pos_i, pos_j, neg_j, lr, margin):
    d = C.shape[1]
    n_layers = mlp_dims.shape[0] - 1
    width = 1
    for l in range(mlp_dims.shape[0]):
        if mlp_dims[l] > width:
            width = mlp_dims[l]
    x_pos = np.zeros(2 * d)
    x_neg = np.zeros(2 * d)
    acts_pos = np.zeros((n_layers + 1, width))
    acts_neg = np.zeros((n_layers + 1, width))
    c_old = np.zeros(d)
    e_pos_old = np.zeros(d)
    e_neg_old = np.zeros(d)
    dx_pos = np.zeros(width)
    dx_neg = np.zeros(width)
    scratch = np.zeros(width)
    grad_w = np.zeros_like(mlp_w)
    grad_b = np.zeros_like(mlp_b)
    total = 0.0
    for idx in range(pos_i.shape[0]):
        i = pos_i[idx]
        j = pos_j[idx]
        k = neg_j[idx]
        for a in range(d):
            x_pos[a] = C[i, a]
            x_pos[d + a] = E[j, a]
            x_neg[a] = C[i, a]
            x_neg[d + a] = E[k, a]
        _chain_forward(x_pos, acts_pos, mlp_w, mlp_b, mlp_dims, True)
        _chain_forward(x_neg, acts_neg, mlp_w, mlp_b, mlp_dims, True)
        s_pos = acts_pos[n_layers, 0]
        s_neg = acts_neg[n_layers, 0]
        if use_dot:
            for a in range(d):
                s_pos += C[i, a] * E[j, a]
                s_neg += C[i, a] * E[k, a]
        viol = margin - s_pos + s_neg
        if viol <= 0.0:
            continue
        total += viol
        _zero_grads(grad_w, grad_b, mlp_dims)
        dx_pos[0] = -1.0
        _chain_backward(acts_pos, mlp_w, mlp_dims, True, dx_pos, scratch, grad_w, grad_b)
        dx_neg[0] = 1.0
        _chain_backward(acts_neg, mlp_w, mlp_dims, True, dx_neg, scratch, grad_w, grad_b)
        for a in range(d):
            c_old[a] = C[i, a]
            e_pos_old[a] = E[j, a]
            e_neg_old[a] = E[k, a]
        for layer in range(n_layers):
            for r in range(mlp_dims[layer + 1]):
                mlp_b[layer, r] -= lr * grad_b[layer, r]
                for c in range(mlp_dims[layer]):
                    mlp_w[layer, r, c] -= lr * grad_w[layer, r, c]
        for a in range(d):
            gc = dx_pos[a] + dx_neg[a]
            ge_pos = dx_pos[d + a]
            ge_neg = dx_neg[d + a]
            if use_dot:
                gc += e_neg_old[a] - e_pos_old[a]
                ge_pos -= c_old[a]
                ge_neg += c_old[a]
            C[i, a] -= lr * gc
            E[j, a] -= lr * ge_pos
            E[k, a] -= lr * ge_neg
    return total
