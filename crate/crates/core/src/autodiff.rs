//! Reverse-mode automatic differentiation over vector-valued nodes.
//!
//! The deep model builds its computation graph on a [`Tape`]: leaves hold
//! parameter or input vectors, interior nodes apply the handful of
//! operations the continuous-time LSTM needs (matrix-vector products,
//! elementwise gates, softplus heads, dots and logs). [`Tape::backward`]
//! walks the nodes once in reverse and returns per-leaf gradients.
//!
//! Forward values are stored on the tape, so value-only evaluation (used by
//! finite-difference checks and prediction) pays no gradient cost.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    idx: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// y = W x with W row-major (rows x cols).
    MatVec { w: Var, x: Var, rows: usize, cols: usize },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Hadamard { a: Var, b: Var },
    Scale { a: Var, k: f64 },
    Sigmoid { a: Var },
    Tanh { a: Var },
    Exp { a: Var },
    Ln { a: Var },
    Dot { a: Var, b: Var },
    Sum { a: Var },
    /// Elementwise s * ln(1 + exp(x/s)) with fixed scale.
    SoftplusConst { a: Var, s: f64 },
    /// Scalar softplus with learned scalar scale: s * ln(1 + exp(x/s)).
    SoftplusVar { x: Var, s: Var },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Grads {
    g: Vec<Vec<f64>>,
}

impl Grads {
    pub fn of(&self, v: Var) -> &[f64] {
        &self.g[v.idx]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln(1 + exp(z)) without overflow.
fn softplus_raw(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else if z < -30.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drop all nodes, keeping allocation capacity for the next pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.idx].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.idx].value.len(), 1);
        self.nodes[v.idx].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            idx: self.nodes.len() - 1,
        }
    }

    /// Differentiable leaf (parameters) or plain input (constants); the
    /// distinction is only who reads the gradient afterwards.
    pub fn leaf(&mut self, values: Vec<f64>) -> Var {
        self.push(values, Op::Leaf)
    }

    pub fn leaf_scalar(&mut self, value: f64) -> Var {
        self.leaf(vec![value])
    }

    pub fn matvec(&mut self, w: Var, x: Var, rows: usize) -> Var {
        let cols = self.nodes[x.idx].value.len();
        debug_assert_eq!(self.nodes[w.idx].value.len(), rows * cols);
        let mut out = vec![0.0; rows];
        let wv = &self.nodes[w.idx].value;
        let xv = &self.nodes[x.idx].value;
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            out[r] = row.iter().zip(xv).map(|(a, b)| a * b).sum();
        }
        self.push(out, Op::MatVec { w, x, rows, cols })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx]
            .value
            .iter()
            .zip(&self.nodes[b.idx].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(v, Op::Add { a, b })
    }

    pub fn add_many(&mut self, vars: &[Var]) -> Var {
        let mut acc = vars[0];
        for v in &vars[1..] {
            acc = self.add(acc, *v);
        }
        acc
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx]
            .value
            .iter()
            .zip(&self.nodes[b.idx].value)
            .map(|(x, y)| x - y)
            .collect();
        self.push(v, Op::Sub { a, b })
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx]
            .value
            .iter()
            .zip(&self.nodes[b.idx].value)
            .map(|(x, y)| x * y)
            .collect();
        self.push(v, Op::Hadamard { a, b })
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v: Vec<f64> = self.nodes[a.idx].value.iter().map(|x| k * x).collect();
        self.push(v, Op::Scale { a, k })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid { a })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx].value.iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh { a })
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx].value.iter().map(|x| x.exp()).collect();
        self.push(v, Op::Exp { a })
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v: Vec<f64> = self.nodes[a.idx].value.iter().map(|x| x.ln()).collect();
        self.push(v, Op::Ln { a })
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let v: f64 = self.nodes[a.idx]
            .value
            .iter()
            .zip(&self.nodes[b.idx].value)
            .map(|(x, y)| x * y)
            .sum();
        self.push(vec![v], Op::Dot { a, b })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v: f64 = self.nodes[a.idx].value.iter().sum();
        self.push(vec![v], Op::Sum { a })
    }

    pub fn softplus_const(&mut self, a: Var, s: f64) -> Var {
        debug_assert!(s > 0.0);
        let v: Vec<f64> = self.nodes[a.idx]
            .value
            .iter()
            .map(|&x| s * softplus_raw(x / s))
            .collect();
        self.push(v, Op::SoftplusConst { a, s })
    }

    /// Scalar softplus with learned scale; both arguments are length-1.
    pub fn softplus_var(&mut self, x: Var, s: Var) -> Var {
        let xv = self.scalar(x);
        let sv = self.scalar(s);
        debug_assert!(sv > 0.0);
        let v = sv * softplus_raw(xv / sv);
        self.push(vec![v], Op::SoftplusVar { x, s })
    }

    /// Reverse sweep from a scalar output. Returns gradients for every node;
    /// callers read the leaves they care about.
    pub fn backward(&self, output: Var) -> Grads {
        let mut g: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.value.len()]).collect();
        debug_assert_eq!(self.nodes[output.idx].value.len(), 1);
        g[output.idx][0] = 1.0;

        for idx in (0..=output.idx).rev() {
            let node = &self.nodes[idx];
            // skip untouched nodes
            if g[idx].iter().all(|&x| x == 0.0) {
                continue;
            }
            match node.op {
                Op::Leaf => {}
                Op::MatVec { w, x, rows, cols } => {
                    let gy = std::mem::take(&mut g[idx]);
                    let xv = self.nodes[x.idx].value.clone();
                    let wv = &self.nodes[w.idx].value;
                    let mut gx = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = gy[r];
                        if gr == 0.0 {
                            continue;
                        }
                        let row = &wv[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            gx[c] += gr * row[c];
                        }
                    }
                    {
                        let gw = &mut g[w.idx];
                        for r in 0..rows {
                            let gr = gy[r];
                            if gr == 0.0 {
                                continue;
                            }
                            for c in 0..cols {
                                gw[r * cols + c] += gr * xv[c];
                            }
                        }
                    }
                    for (t, s) in g[x.idx].iter_mut().zip(&gx) {
                        *t += s;
                    }
                    g[idx] = gy;
                }
                Op::Add { a, b } => {
                    let gy = g[idx].clone();
                    for (t, s) in g[a.idx].iter_mut().zip(&gy) {
                        *t += s;
                    }
                    for (t, s) in g[b.idx].iter_mut().zip(&gy) {
                        *t += s;
                    }
                }
                Op::Sub { a, b } => {
                    let gy = g[idx].clone();
                    for (t, s) in g[a.idx].iter_mut().zip(&gy) {
                        *t += s;
                    }
                    for (t, s) in g[b.idx].iter_mut().zip(&gy) {
                        *t -= s;
                    }
                }
                Op::Hadamard { a, b } => {
                    let gy = g[idx].clone();
                    let av = self.nodes[a.idx].value.clone();
                    let bv = self.nodes[b.idx].value.clone();
                    for ((t, s), vb) in g[a.idx].iter_mut().zip(&gy).zip(&bv) {
                        *t += s * vb;
                    }
                    for ((t, s), va) in g[b.idx].iter_mut().zip(&gy).zip(&av) {
                        *t += s * va;
                    }
                }
                Op::Scale { a, k } => {
                    let gy = g[idx].clone();
                    for (t, s) in g[a.idx].iter_mut().zip(&gy) {
                        *t += k * s;
                    }
                }
                Op::Sigmoid { a } => {
                    let gy = g[idx].clone();
                    let yv = node.value.clone();
                    for ((t, s), y) in g[a.idx].iter_mut().zip(&gy).zip(&yv) {
                        *t += s * y * (1.0 - y);
                    }
                }
                Op::Tanh { a } => {
                    let gy = g[idx].clone();
                    let yv = node.value.clone();
                    for ((t, s), y) in g[a.idx].iter_mut().zip(&gy).zip(&yv) {
                        *t += s * (1.0 - y * y);
                    }
                }
                Op::Exp { a } => {
                    let gy = g[idx].clone();
                    let yv = node.value.clone();
                    for ((t, s), y) in g[a.idx].iter_mut().zip(&gy).zip(&yv) {
                        *t += s * y;
                    }
                }
                Op::Ln { a } => {
                    let gy = g[idx].clone();
                    let av = self.nodes[a.idx].value.clone();
                    for ((t, s), x) in g[a.idx].iter_mut().zip(&gy).zip(&av) {
                        *t += s / x;
                    }
                }
                Op::Dot { a, b } => {
                    let gy = g[idx][0];
                    let av = self.nodes[a.idx].value.clone();
                    let bv = self.nodes[b.idx].value.clone();
                    for (t, vb) in g[a.idx].iter_mut().zip(&bv) {
                        *t += gy * vb;
                    }
                    for (t, va) in g[b.idx].iter_mut().zip(&av) {
                        *t += gy * va;
                    }
                }
                Op::Sum { a } => {
                    let gy = g[idx][0];
                    for t in g[a.idx].iter_mut() {
                        *t += gy;
                    }
                }
                Op::SoftplusConst { a, s } => {
                    let gy = g[idx].clone();
                    let av = self.nodes[a.idx].value.clone();
                    for ((t, gyi), x) in g[a.idx].iter_mut().zip(&gy).zip(&av) {
                        *t += gyi * sigmoid(x / s);
                    }
                }
                Op::SoftplusVar { x, s } => {
                    let gy = g[idx][0];
                    let xv = self.nodes[x.idx].value[0];
                    let sv = self.nodes[s.idx].value[0];
                    let sig = sigmoid(xv / sv);
                    g[x.idx][0] += gy * sig;
                    // d/ds [s*softplus(x/s)] = softplus(x/s) - (x/s)*sigmoid(x/s)
                    g[s.idx][0] += gy * (softplus_raw(xv / sv) - (xv / sv) * sig);
                }
            }
        }
        Grads { g }
    }
}
