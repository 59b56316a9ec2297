use super::conv::{self, ConvGeometry};
use super::{Tensor, TensorError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    Conv { x: Var, k: Var, b: Option<Var>, geom: ConvGeometry },
    ConvTranspose { x: Var, k: Var, b: Option<Var>, geom: ConvGeometry },
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Square(Var),
    Abs(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sum(Var),
    Reshape(Var),
    ConcatCols { a: Var, b: Var },
    CosineL1 { mu: Var, target: Tensor, normalizer: f64 },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of operations.
///
/// Parents always precede their children, so a reverse sweep over the node
/// list is a valid topological order for backpropagation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`]. Nodes not reached from the root
/// report a zero gradient.
#[derive(Debug)]
pub struct Gradients {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor { shape, data: g.clone() },
            None => Tensor::zeros(&shape),
        }
    }

    /// Moves the gradient out, leaving zero behind.
    pub fn take(&mut self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match self.grads[v.0].take() {
            Some(data) => Tensor { shape, data },
            None => Tensor::zeros(&shape),
        }
    }
}

fn unary_map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: t.shape.clone(),
        data: t.data.iter().map(|&v| f(v)).collect(),
    }
}

/// Row-normalised copy of `mu` together with its row norms.
fn unit_rows(mu: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (mu.shape[0], mu.shape[1]);
    let mut unit = vec![0.0; n * d];
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let row = mu.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(COSINE_EPS);
        norms[i] = norm;
        for (u, v) in unit[i * d..(i + 1) * d].iter_mut().zip(row) {
            *u = v / norm;
        }
    }
    (unit, norms)
}

/// Lower bound on latent norms inside the cosine similarity.
pub(crate) const COSINE_EPS: f64 = 1e-12;

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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    /// Records an input, parameter or constant.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::Dimension {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    /// `out[b, j] = Σ_i x[b, i] · w[i, j] + bias[j]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || bs != [ws[1]] {
            return Err(TensorError::Dimension {
                op: "dense",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        let (batch, n, m) = (xs[0], ws[0], ws[1]);
        let (xv, wv, bv) = (&self.value(x).data, &self.value(w).data, &self.value(b).data);
        let mut out = Vec::with_capacity(batch * m);
        for r in 0..batch {
            let mut row = bv.clone();
            for (i, &xi) in xv[r * n..(r + 1) * n].iter().enumerate() {
                if xi != 0.0 {
                    for (o, &wij) in row.iter_mut().zip(&wv[i * m..(i + 1) * m]) {
                        *o += xi * wij;
                    }
                }
            }
            out.extend(row);
        }
        let value = Tensor { shape: vec![batch, m], data: out };
        Ok(self.push(value, Op::Dense { x, w, b }))
    }

    /// Valid cross-correlation of `[B, C, s...]` with `[K, C, k...]`, plus optional per-channel bias.
    pub fn conv(&mut self, x: Var, k: Var, b: Option<Var>, stride: usize) -> Result<Var, TensorError> {
        let geom = ConvGeometry::for_conv(self.shape(x), self.shape(k), stride)?;
        if let Some(b) = b {
            if self.shape(b) != [geom.narrow_channels] {
                return Err(TensorError::Dimension {
                    op: "conv bias",
                    lhs: self.shape(b).to_vec(),
                    rhs: vec![geom.narrow_channels],
                });
            }
        }
        let mut out = conv::correlate(&geom, &self.value(x).data, &self.value(k).data);
        if let Some(b) = b {
            conv::add_channel_bias(&mut out, geom.batch, geom.narrow_channels, &self.value(b).data);
        }
        let value = Tensor { shape: geom.narrow_shape(), data: out };
        Ok(self.push(value, Op::Conv { x, k, b, geom }))
    }

    /// Transposed convolution of `[B, K, s...]` with `[K, C, k...]`; output extent `(s − 1)·stride + k`.
    pub fn conv_transpose(&mut self, x: Var, k: Var, b: Option<Var>, stride: usize) -> Result<Var, TensorError> {
        let geom = ConvGeometry::for_conv_transpose(self.shape(x), self.shape(k), stride)?;
        if let Some(b) = b {
            if self.shape(b) != [geom.wide_channels] {
                return Err(TensorError::Dimension {
                    op: "conv_transpose bias",
                    lhs: self.shape(b).to_vec(),
                    rhs: vec![geom.wide_channels],
                });
            }
        }
        let mut out = conv::scatter(&geom, &self.value(x).data, &self.value(k).data);
        if let Some(b) = b {
            conv::add_channel_bias(&mut out, geom.batch, geom.wide_channels, &self.value(b).data);
        }
        let value = Tensor { shape: geom.wide_shape(), data: out };
        Ok(self.push(value, Op::ConvTranspose { x, k, b, geom }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = unary_map(self.value(x), |v| v.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = unary_map(self.value(x), |v| 1.0 / (1.0 + (-v).exp()));
        self.push(v, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let v = unary_map(self.value(x), f64::exp);
        self.push(v, Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = unary_map(self.value(x), |v| v * v);
        self.push(v, Op::Square(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = unary_map(self.value(x), f64::abs);
        self.push(v, Op::Abs(x))
    }

    /// Element-wise clamp; the gradient is zero outside `[lo, hi]`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = unary_map(self.value(x), |v| v.clamp(lo, hi));
        self.push(v, Op::Clamp { x, lo, hi })
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, TensorError> {
        self.same_shape(op, a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        Ok(Tensor {
            shape: av.shape.clone(),
            data: av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = unary_map(self.value(x), |v| v * c);
        self.push(v, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let v = unary_map(self.value(x), |v| v + c);
        self.push(v, Op::AddScalar(x))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, TensorError> {
        let v = self.value(x).reshaped(shape)?;
        Ok(self.push(v, Op::Reshape(x)))
    }

    /// Concatenates `[B, n]` and `[B, m]` into `[B, n + m]`.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] {
            return Err(TensorError::Dimension {
                op: "concat_cols",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (rows, n, m) = (sa[0], sa[1], sb[1]);
        let mut data = Vec::with_capacity(rows * (n + m));
        for r in 0..rows {
            data.extend_from_slice(self.value(a).row(r));
            data.extend_from_slice(self.value(b).row(r));
        }
        let v = Tensor { shape: vec![rows, n + m], data };
        Ok(self.push(v, Op::ConcatCols { a, b }))
    }

    /// `Σ_{i,j} |target[i, j] − cos(mu_i, mu_j)| / normalizer` over all row pairs of `mu` `[N, d]`.
    pub fn cosine_l1(&mut self, mu: Var, target: Tensor, normalizer: f64) -> Result<Var, TensorError> {
        let ms = self.shape(mu);
        if ms.len() != 2 || target.shape != [ms[0], ms[0]] {
            return Err(TensorError::Dimension {
                op: "cosine_l1",
                lhs: ms.to_vec(),
                rhs: target.shape.clone(),
            });
        }
        let n = ms[0];
        let d = ms[1];
        let (unit, _) = unit_rows(self.value(mu));
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let cos: f64 = (0..d).map(|t| unit[i * d + t] * unit[j * d + t]).sum();
                total += (target.data[i * n + j] - cos).abs();
            }
        }
        let v = Tensor::scalar(total / normalizer);
        Ok(self.push(v, Op::CosineL1 { mu, target, normalizer }))
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients, TensorError> {
        if self.value(root).len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
            grads,
        })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, contribution: Vec<f64>| match &mut grads[v.0] {
            Some(existing) => existing.iter_mut().zip(&contribution).for_each(|(e, c)| *e += c),
            slot @ None => *slot = Some(contribution),
        };
        let val = |v: Var| &self.nodes[v.0].value;
        let zip_map = |a: &[f64], f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(g).map(|(&x, &gi)| f(x, gi)).collect() };

        match &node.op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let (batch, n, m) = (xv.shape[0], wv.shape[0], wv.shape[1]);
                let mut gx = vec![0.0; batch * n];
                let mut gw = vec![0.0; n * m];
                let mut gb = vec![0.0; m];
                for r in 0..batch {
                    let grow = &g[r * m..(r + 1) * m];
                    let xrow = &xv.data[r * n..(r + 1) * n];
                    for (gbj, &gj) in gb.iter_mut().zip(grow) {
                        *gbj += gj;
                    }
                    for i in 0..n {
                        let wrow = &wv.data[i * m..(i + 1) * m];
                        gx[r * n + i] = wrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        let xi = xrow[i];
                        if xi != 0.0 {
                            for (gwij, &gj) in gw[i * m..(i + 1) * m].iter_mut().zip(grow) {
                                *gwij += xi * gj;
                            }
                        }
                    }
                }
                acc(*x, gx);
                acc(*w, gw);
                acc(*b, gb);
            }
            Op::Conv { x, k, b, geom } => {
                acc(*x, conv::scatter(geom, g, &val(*k).data));
                acc(*k, conv::kernel_grad(geom, g, &val(*x).data));
                if let Some(b) = b {
                    acc(*b, conv::channel_sums(g, geom.batch, geom.narrow_channels));
                }
            }
            Op::ConvTranspose { x, k, b, geom } => {
                acc(*x, conv::correlate(geom, g, &val(*k).data));
                acc(*k, conv::kernel_grad(geom, &val(*x).data, g));
                if let Some(b) = b {
                    acc(*b, conv::channel_sums(g, geom.batch, geom.wide_channels));
                }
            }
            Op::Relu(x) => acc(*x, zip_map(&val(*x).data, &|v, gi| if v > 0.0 { gi } else { 0.0 })),
            Op::Sigmoid(x) => acc(*x, zip_map(&node.value.data, &|s, gi| gi * s * (1.0 - s))),
            Op::Exp(x) => acc(*x, zip_map(&node.value.data, &|e, gi| gi * e)),
            Op::Square(x) => acc(*x, zip_map(&val(*x).data, &|v, gi| 2.0 * v * gi)),
            Op::Abs(x) => acc(*x, zip_map(&val(*x).data, &|v, gi| v.signum() * gi * f64::from(v != 0.0))),
            Op::Clamp { x, lo, hi } => acc(
                *x,
                zip_map(&val(*x).data, &|v, gi| if v >= *lo && v <= *hi { gi } else { 0.0 }),
            ),
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                acc(*a, zip_map(&val(*b).data, &|y, gi| y * gi));
                acc(*b, zip_map(&val(*a).data, &|x, gi| x * gi));
            }
            Op::Scale(x, c) => acc(*x, g.iter().map(|v| v * c).collect()),
            Op::AddScalar(x) => acc(*x, g.to_vec()),
            Op::Sum(x) => acc(*x, vec![g[0]; val(*x).len()]),
            Op::Reshape(x) => acc(*x, g.to_vec()),
            Op::ConcatCols { a, b } => {
                let (n, m) = (val(*a).shape[1], val(*b).shape[1]);
                let rows = val(*a).shape[0];
                let mut ga = Vec::with_capacity(rows * n);
                let mut gb = Vec::with_capacity(rows * m);
                for r in 0..rows {
                    ga.extend_from_slice(&g[r * (n + m)..r * (n + m) + n]);
                    gb.extend_from_slice(&g[r * (n + m) + n..(r + 1) * (n + m)]);
                }
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::CosineL1 { mu, target, normalizer } => {
                let muv = val(*mu);
                let (n, d) = (muv.shape[0], muv.shape[1]);
                let (unit, norms) = unit_rows(muv);
                let mut gmu = vec![0.0; n * d];
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let ui = &unit[i * d..(i + 1) * d];
                        let uj = &unit[j * d..(j + 1) * d];
                        let cos: f64 = ui.iter().zip(uj).map(|(a, b)| a * b).sum();
                        let diff = target.data[i * n + j] - cos;
                        if diff == 0.0 {
                            continue;
                        }
                        // d|A - cos|/dcos = -sign(A - cos); cos_ij depends on rows i and j.
                        let w = -diff.signum() * g[0] / normalizer;
                        for t in 0..d {
                            gmu[i * d + t] += w * (uj[t] - cos * ui[t]) / norms[i];
                            gmu[j * d + t] += w * (ui[t] - cos * uj[t]) / norms[j];
                        }
                    }
                }
                acc(*mu, gmu);
            }
        }
    }
}
