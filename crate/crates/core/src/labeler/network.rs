//! Forward and backward passes over a flat parameter vector.
//!
//! Parameter layout, in order: four attribute tables (`rows × attr_dim`),
//! the projection `embed_dim × 4·attr_dim` and its bias, then per layer a
//! weight `pieces·embed_dim × (2·window+1)·embed_dim` and bias, then the output
//! weight `n_labels × embed_dim` and bias. Matrices are row-major with one row
//! per output unit.

use std::ops::Range;

use super::embed::{feature_rows, N_ATTRIBUTES};
use super::LabelerConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub tables: [Range<usize>; N_ATTRIBUTES],
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
    pub layers: Vec<(Range<usize>, Range<usize>)>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &LabelerConfig) -> Layout {
        let mut next = 0;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let rows = cfg.table_rows.as_array();
        let tables = std::array::from_fn(|a| take(rows[a] * cfg.attr_dim));
        let proj_w = take(cfg.embed_dim * N_ATTRIBUTES * cfg.attr_dim);
        let proj_b = take(cfg.embed_dim);
        let width = cfg.window_width();
        let layers = (0..cfg.n_layers)
            .map(|_| {
                let w = take(cfg.maxout_pieces * cfg.embed_dim * width * cfg.embed_dim);
                let b = take(cfg.maxout_pieces * cfg.embed_dim);
                (w, b)
            })
            .collect();
        let out_w = take(cfg.n_labels * cfg.embed_dim);
        let out_b = take(cfg.n_labels);
        Layout {
            tables,
            proj_w,
            proj_b,
            layers,
            out_w,
            out_b,
            total: next,
        }
    }

    /// Every block with its (fan_in, fan_out) for initialization; biases report `None`.
    pub fn blocks(&self, cfg: &LabelerConfig) -> Vec<(Range<usize>, Option<(usize, usize)>)> {
        let rows = cfg.table_rows.as_array();
        let mut out = Vec::new();
        for a in 0..N_ATTRIBUTES {
            out.push((self.tables[a].clone(), Some((rows[a], cfg.attr_dim))));
        }
        out.push((self.proj_w.clone(), Some((N_ATTRIBUTES * cfg.attr_dim, cfg.embed_dim))));
        out.push((self.proj_b.clone(), None));
        for (w, b) in &self.layers {
            out.push((
                w.clone(),
                Some((cfg.window_width() * cfg.embed_dim, cfg.maxout_pieces * cfg.embed_dim)),
            ));
            out.push((b.clone(), None));
        }
        out.push((self.out_w.clone(), Some((cfg.embed_dim, cfg.n_labels))));
        out.push((self.out_b.clone(), None));
        out
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub n: usize,
    pub rows: Vec<[usize; N_ATTRIBUTES]>,
    /// `n × 4·attr_dim` concatenated table rows.
    pub concat: Vec<f64>,
    /// `n_layers + 1` activations of `n × embed_dim`; index 0 is the projection output.
    pub activations: Vec<Vec<f64>>,
    /// Winning maxout piece per layer, token and unit.
    pub argmax: Vec<Vec<u8>>,
    /// `n × n_labels` softmax output.
    pub probs: Vec<f64>,
    /// Smallest gap between the winning and runner-up maxout piece.
    pub min_margin: f64,
}

pub(crate) struct Network<'a> {
    pub cfg: &'a LabelerConfig,
    pub layout: &'a Layout,
    pub params: &'a [f64],
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl Network<'_> {
    pub fn token_rows(&self, tokens: &[String]) -> Vec<[usize; N_ATTRIBUTES]> {
        tokens
            .iter()
            .map(|t| feature_rows(t, &self.cfg.table_rows))
            .collect()
    }

    fn window_input(&self, x: &[f64], n: usize, i: usize, u: &mut [f64]) {
        let d = self.cfg.embed_dim;
        let w = self.cfg.window as isize;
        for (slot, k) in (-w..=w).enumerate() {
            let j = i as isize + k;
            let dst = &mut u[slot * d..(slot + 1) * d];
            if j < 0 || j >= n as isize {
                dst.fill(0.0);
            } else {
                let j = j as usize;
                dst.copy_from_slice(&x[j * d..(j + 1) * d]);
            }
        }
    }

    pub fn forward(&self, rows: Vec<[usize; N_ATTRIBUTES]>) -> ForwardCache {
        let cfg = self.cfg;
        let p = self.params;
        let (d, a_dim) = (cfg.embed_dim, cfg.attr_dim);
        let cat = N_ATTRIBUTES * a_dim;
        let n = rows.len();

        let mut concat = vec![0.0; n * cat];
        for (i, r) in rows.iter().enumerate() {
            for a in 0..N_ATTRIBUTES {
                let table = &p[self.layout.tables[a].clone()];
                concat[i * cat + a * a_dim..i * cat + (a + 1) * a_dim]
                    .copy_from_slice(&table[r[a] * a_dim..(r[a] + 1) * a_dim]);
            }
        }

        let proj_w = &p[self.layout.proj_w.clone()];
        let proj_b = &p[self.layout.proj_b.clone()];
        let mut x = vec![0.0; n * d];
        for i in 0..n {
            let c = &concat[i * cat..(i + 1) * cat];
            for o in 0..d {
                x[i * d + o] = proj_b[o] + dot(&proj_w[o * cat..(o + 1) * cat], c);
            }
        }

        let width = cfg.window_width() * d;
        let pieces = cfg.maxout_pieces;
        let mut activations = vec![x];
        let mut argmax = Vec::with_capacity(cfg.n_layers);
        let mut u = vec![0.0; width];
        let mut z = vec![0.0; pieces * d];
        let mut min_margin = f64::INFINITY;
        for (l, (w_range, b_range)) in self.layout.layers.iter().enumerate() {
            let w = &p[w_range.clone()];
            let b = &p[b_range.clone()];
            let input = activations.last().expect("projection output");
            let mut out = vec![0.0; n * d];
            let mut arg = vec![0u8; n * d];
            for i in 0..n {
                self.window_input(input, n, i, &mut u);
                for (r, zr) in z.iter_mut().enumerate() {
                    *zr = b[r] + dot(&w[r * width..(r + 1) * width], &u);
                }
                for j in 0..d {
                    let mut best = 0;
                    for piece in 1..pieces {
                        if z[piece * d + j] > z[best * d + j] {
                            best = piece;
                        }
                    }
                    for piece in (0..pieces).filter(|&q| q != best) {
                        min_margin = min_margin.min(z[best * d + j] - z[piece * d + j]);
                    }
                    let mut v = z[best * d + j];
                    if cfg.residual && l > 0 {
                        v += input[i * d + j];
                    }
                    out[i * d + j] = v;
                    arg[i * d + j] = best as u8;
                }
            }
            activations.push(out);
            argmax.push(arg);
        }

        let out_w = &p[self.layout.out_w.clone()];
        let out_b = &p[self.layout.out_b.clone()];
        let k = cfg.n_labels;
        let top = activations.last().expect("final activation");
        let mut probs = vec![0.0; n * k];
        for i in 0..n {
            let h = &top[i * d..(i + 1) * d];
            let row = &mut probs[i * k..(i + 1) * k];
            for (c, v) in row.iter_mut().enumerate() {
                *v = out_b[c] + dot(&out_w[c * d..(c + 1) * d], h);
            }
            softmax_in_place(row);
        }

        ForwardCache {
            n,
            rows,
            concat,
            activations,
            argmax,
            probs,
            min_margin,
        }
    }

    /// Adds `scale ×` the gradient of the summed token cross-entropy to `grad`
    /// and returns the unscaled summed loss. Tokens with `None` targets are ignored.
    pub fn backward(&self, cache: &ForwardCache, targets: &[Option<usize>], scale: f64, grad: &mut [f64]) -> f64 {
        let cfg = self.cfg;
        let p = self.params;
        let (d, a_dim, k) = (cfg.embed_dim, cfg.attr_dim, cfg.n_labels);
        let cat = N_ATTRIBUTES * a_dim;
        let n = cache.n;
        debug_assert_eq!(targets.len(), n);

        let mut loss = 0.0;
        let top = cache.activations.last().expect("final activation");
        let mut d_x = vec![0.0; n * d];
        let out_w_range = self.layout.out_w.clone();
        let out_b_start = self.layout.out_b.start;
        for (i, target) in targets.iter().enumerate() {
            let Some(y) = *target else { continue };
            let probs = &cache.probs[i * k..(i + 1) * k];
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            let h = &top[i * d..(i + 1) * d];
            for c in 0..k {
                let g = scale * (probs[c] - if c == y { 1.0 } else { 0.0 });
                grad[out_b_start + c] += g;
                let row = out_w_range.start + c * d;
                axpy(g, h, &mut grad[row..row + d]);
                axpy(g, &p[row..row + d], &mut d_x[i * d..(i + 1) * d]);
            }
        }

        let width = cfg.window_width() * d;
        let w_span = cfg.window as isize;
        let mut u = vec![0.0; width];
        let mut d_u = vec![0.0; width];
        for l in (0..cfg.n_layers).rev() {
            let (w_range, b_range) = &self.layout.layers[l];
            let input = &cache.activations[l];
            let arg = &cache.argmax[l];
            let mut d_in = if cfg.residual && l > 0 {
                d_x.clone()
            } else {
                vec![0.0; n * d]
            };
            for i in 0..n {
                let d_out = &d_x[i * d..(i + 1) * d];
                if d_out.iter().all(|&g| g == 0.0) {
                    continue;
                }
                self.window_input(input, n, i, &mut u);
                d_u.fill(0.0);
                for j in 0..d {
                    let g = d_out[j];
                    if g == 0.0 {
                        continue;
                    }
                    let r = arg[i * d + j] as usize * d + j;
                    grad[b_range.start + r] += g;
                    let row = w_range.start + r * width;
                    axpy(g, &u, &mut grad[row..row + width]);
                    axpy(g, &p[row..row + width], &mut d_u);
                }
                for (slot, off) in (-w_span..=w_span).enumerate() {
                    let jdx = i as isize + off;
                    if jdx < 0 || jdx >= n as isize {
                        continue;
                    }
                    let jdx = jdx as usize;
                    axpy(1.0, &d_u[slot * d..(slot + 1) * d], &mut d_in[jdx * d..(jdx + 1) * d]);
                }
            }
            d_x = d_in;
        }

        let proj_w = self.layout.proj_w.clone();
        let proj_b = self.layout.proj_b.start;
        let mut d_c = vec![0.0; cat];
        for i in 0..n {
            let g_x = &d_x[i * d..(i + 1) * d];
            if g_x.iter().all(|&g| g == 0.0) {
                continue;
            }
            let c = &cache.concat[i * cat..(i + 1) * cat];
            d_c.fill(0.0);
            for o in 0..d {
                let g = g_x[o];
                grad[proj_b + o] += g;
                let row = proj_w.start + o * cat;
                axpy(g, c, &mut grad[row..row + cat]);
                axpy(g, &p[row..row + cat], &mut d_c);
            }
            for a in 0..N_ATTRIBUTES {
                let start = self.layout.tables[a].start + cache.rows[i][a] * a_dim;
                axpy(1.0, &d_c[a * a_dim..(a + 1) * a_dim], &mut grad[start..start + a_dim]);
            }
        }
        loss
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
