//! Straightforward per-block, per-edge evaluation of the encoder with nested
//! loops over plain vectors. Shares nothing with the optimized path except
//! the parameter values.

use get_core::layers::{GetLayerParams, LayerNormParams};
use get_core::model::Model;
use get_core::repr::ComplexGraph;
use get_tensor::{Activation, Mlp, ParamStore};

pub type Mat = Vec<Vec<f64>>;

/// Per-block features and coordinates.
#[derive(Clone, Debug)]
pub struct Dense {
    pub h: Vec<Mat>,
    pub x: Vec<Vec<[f64; 3]>>,
}

pub struct Weights {
    /// `alpha[e][p][q]` for the edges of the graph in their stored order.
    pub alpha: Vec<Mat>,
    pub beta: Vec<f64>,
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Silu => v / (1.0 + (-v).exp()),
        Activation::Relu => v.max(0.0),
        Activation::Identity => v,
    }
}

pub fn mlp(store: &ParamStore, m: &Mlp, input: &[f64]) -> Vec<f64> {
    let mut h = input.to_vec();
    let n = m.layers().len();
    for (l, lin) in m.layers().iter().enumerate() {
        let w = store.get(lin.weight);
        let b = store.get(lin.bias).data();
        let (rows, cols) = (w.shape()[0], w.shape()[1]);
        assert_eq!(rows, h.len());
        let mut out = b.to_vec();
        for c in 0..cols {
            for r in 0..rows {
                out[c] += h[r] * w.get(r, c);
            }
        }
        if l + 1 < n {
            out = out.into_iter().map(|v| act(m.activation(), v)).collect();
        }
        h = out;
    }
    h
}

fn scalar(store: &ParamStore, m: &Mlp, v: f64) -> f64 {
    mlp(store, m, &[v])[0]
}

fn project(store: &ParamStore, w: get_tensor::ParamId, h: &[f64]) -> Vec<f64> {
    let w = store.get(w);
    (0..w.shape()[1])
        .map(|c| (0..w.shape()[0]).map(|r| h[r] * w.get(r, c)).sum())
        .collect()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn embed(model: &Model, g: &ComplexGraph) -> Dense {
    let st = &model.store;
    let s = &model.stack;
    let row = |t, i: usize| st.get(t).row(i).to_vec();
    let mut h = Vec::new();
    let mut x = Vec::new();
    for b in g.blocks() {
        let mut hb = Vec::new();
        for a in &b.atoms {
            let (e, bt, p) = (
                row(s.atom_table, a.element.id()),
                row(s.block_table, b.block_type.id()),
                row(s.pos_table, a.pos_code.id()),
            );
            hb.push((0..e.len()).map(|k| e[k] + bt[k] + p[k]).collect());
        }
        h.push(hb);
        x.push(b.atoms.iter().map(|a| a.coord).collect());
    }
    Dense { h, x }
}

pub fn attention(model: &Model, p: &GetLayerParams, g: &ComplexGraph, s: &Dense) -> (Dense, Weights) {
    let st = &model.store;
    let edges = g.edges();
    let mut alpha_all: Vec<Mat> = vec![Vec::new(); edges.len()];
    let mut beta_all = vec![0.0; edges.len()];
    let mut out = s.clone();
    for i in 0..g.n_blocks() {
        let mine: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].dst == i).collect();
        let mut r_block = Vec::new();
        let mut alphas = Vec::new();
        let mut logits_all = Vec::new();
        for &e in &mine {
            let j = edges[e].src;
            let edge_feat = st.get(model.stack.edge_table).row(edges[e].kind.id()).to_vec();
            let mut logits: Mat = Vec::new();
            let mut total = 0.0;
            for pp in 0..s.h[i].len() {
                let q = project(st, p.w_q, &s.h[i][pp]);
                let mut rowv = Vec::new();
                for qq in 0..s.h[j].len() {
                    let k = project(st, p.w_k, &s.h[j][qq]);
                    let dot: f64 = q.iter().zip(&k).map(|(a, b)| a * b).sum();
                    let d = norm(sub(s.x[i][pp], s.x[j][qq]));
                    let r = dot / (p.d_r as f64).sqrt() + scalar(st, &p.sigma_d, d);
                    total += r;
                    rowv.push(r);
                }
                logits.push(rowv);
            }
            let n_pairs = (s.h[i].len() * s.h[j].len()) as f64;
            r_block.push(total / n_pairs + mlp(st, &p.phi_e, &edge_feat)[0]);
            alphas.push(logits.iter().map(|r| softmax(r)).collect::<Mat>());
            logits_all.push(logits);
        }
        let beta = softmax(&r_block);
        for (n, &e) in mine.iter().enumerate() {
            let j = edges[e].src;
            for pp in 0..s.h[i].len() {
                let mut attended = vec![0.0; p.d_r];
                let mut dx = [0.0; 3];
                for qq in 0..s.h[j].len() {
                    let v = project(st, p.w_v, &s.h[j][qq]);
                    let a = alphas[n][pp][qq];
                    for k in 0..p.d_r {
                        attended[k] += a * v[k];
                    }
                    let w = a * scalar(st, &p.phi_xa, logits_all[n][pp][qq]);
                    let rel = sub(s.x[i][pp], s.x[j][qq]);
                    for c in 0..3 {
                        dx[c] += w * rel[c];
                    }
                }
                let m = mlp(st, &p.phi_m, &attended);
                for k in 0..m.len() {
                    out.h[i][pp][k] += beta[n] * m[k];
                }
                for c in 0..3 {
                    out.x[i][pp][c] += beta[n] * dx[c];
                }
            }
            alpha_all[e] = alphas[n].clone();
            beta_all[e] = beta[n];
        }
    }
    (
        out,
        Weights {
            alpha: alpha_all,
            beta: beta_all,
        },
    )
}

pub fn ffn(model: &Model, p: &GetLayerParams, s: &Dense) -> Dense {
    let st = &model.store;
    let mut out = s.clone();
    for i in 0..s.h.len() {
        let n = s.h[i].len() as f64;
        let d = s.h[i][0].len();
        let hc: Vec<f64> = (0..d).map(|k| s.h[i].iter().map(|h| h[k]).sum::<f64>() / n).collect();
        let xc: [f64; 3] =
            std::array::from_fn(|c| s.x[i].iter().map(|x| x[c]).sum::<f64>() / n);
        for pp in 0..s.h[i].len() {
            let dx = sub(s.x[i][pp], xc);
            let sq = dx.iter().map(|v| v * v).sum::<f64>();
            let r = mlp(st, &p.phi_r, &[sq / (1.0 + sq)]);
            let input: Vec<f64> = s.h[i][pp].iter().chain(&hc).chain(&r).cloned().collect();
            let dh = mlp(st, &p.phi_h, &input);
            let coef = mlp(st, &p.phi_x, &input)[0];
            for k in 0..d {
                out.h[i][pp][k] += dh[k];
            }
            for c in 0..3 {
                out.x[i][pp][c] += dx[c] * coef;
            }
        }
    }
    out
}

pub fn layernorm(model: &Model, ln: &LayerNormParams, eps: f64, s: &Dense) -> Dense {
    let st = &model.store;
    let (gamma, beta, sigma) = (
        st.get(ln.gamma).data(),
        st.get(ln.beta).data(),
        st.get(ln.sigma).data()[0],
    );
    let all: Vec<[f64; 3]> = s.x.iter().flatten().cloned().collect();
    let n = all.len() as f64;
    let e: [f64; 3] = std::array::from_fn(|c| all.iter().map(|x| x[c]).sum::<f64>() / n);
    let var = all.iter().map(|x| norm(sub(*x, e)).powi(2)).sum::<f64>() / (3.0 * n);
    let mut out = s.clone();
    for i in 0..s.h.len() {
        for pp in 0..s.h[i].len() {
            let h = &s.h[i][pp];
            let d = h.len() as f64;
            let m = h.iter().sum::<f64>() / d;
            let v = h.iter().map(|a| (a - m).powi(2)).sum::<f64>() / d;
            out.h[i][pp] = (0..h.len())
                .map(|k| (h[k] - m) / (v + eps).sqrt() * gamma[k] + beta[k])
                .collect();
            let x = s.x[i][pp];
            out.x[i][pp] = std::array::from_fn(|c| (x[c] - e[c]) / (var + eps).sqrt() * sigma + e[c]);
        }
    }
    out
}

pub fn layer(model: &Model, p: &GetLayerParams, g: &ComplexGraph, s: &Dense) -> (Dense, Weights) {
    let (s, w) = attention(model, p, g, s);
    let s = layernorm(model, &p.ln_att, p.ln_eps, &s);
    let s = ffn(model, p, &s);
    (layernorm(model, &p.ln_ffn, p.ln_eps, &s), w)
}

pub fn forward(model: &Model, g: &ComplexGraph) -> Dense {
    let mut s = embed(model, g);
    for p in &model.stack.layers {
        s = layer(model, p, g, &s).0;
    }
    s
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|a| a / n).collect()
}

pub fn graph_vec(h: &[Mat]) -> Vec<f64> {
    let d = h[0][0].len();
    let mut g = vec![0.0; d];
    for block in h {
        let v = normalize((0..d).map(|k| block.iter().map(|a| a[k]).sum()).collect());
        for k in 0..d {
            g[k] += v[k];
        }
    }
    normalize(g)
}

pub fn affinity(model: &Model, g: &ComplexGraph, head: usize) -> f64 {
    let s = forward(model, g);
    mlp(&model.store, &model.heads.regressors[head], &graph_vec(&s.h))[0]
}

/// Flattens per-block rows into atom order.
pub fn flat_h(s: &Dense) -> Vec<f64> {
    s.h.iter().flatten().flatten().cloned().collect()
}

pub fn flat_x(s: &Dense) -> Vec<f64> {
    s.x.iter().flatten().flatten().cloned().collect()
}
