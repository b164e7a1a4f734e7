//! Define-by-run reverse-mode tape over dense matrices.
//!
//! The tape is rebuilt on every forward pass. Each recorded node saves the
//! parent indices it needs; backward walks the node list in reverse and
//! accumulates gradients into every node reachable from the loss.

use super::tensor::{softmax_row, Tensor2};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    Recip(Var),
    PowI(Var, i32),
    Sqrt(Var),
    Ln(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Clamp(Var, f64, f64),
    MatMul(Var, Var),
    Transpose(Var),
    SumAll(Var),
    MeanAll(Var),
    ColMean(Var),
    AddRow(Var, Var),
    SubRow(Var, Var),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    Reshape(Var),
    SoftmaxRows(Var),
    MaxAll(Var),
    MinAll(Var),
}

struct Node {
    value: Tensor2,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar_value(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.shape(), (1, 1), "expected a scalar node");
        t.data[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor2, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor2, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor2::scalar(v))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.needs(&[a, b]);
        self.push(v, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.needs(&[a, b]);
        self.push(v, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.needs(&[a, b]);
        self.push(v, Op::Mul(a, b), rg)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let rg = self.needs(&[a]);
        self.push(v, Op::AddConst(a), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(c);
        let rg = self.needs(&[a]);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 / x);
        let rg = self.needs(&[a]);
        self.push(v, Op::Recip(a), rg)
    }

    pub fn powi(&mut self, a: Var, k: i32) -> Var {
        let v = self.value(a).map(|x| x.powi(k));
        let rg = self.needs(&[a]);
        self.push(v, Op::PowI(a, k), rg)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::sqrt);
        let rg = self.needs(&[a]);
        self.push(v, Op::Sqrt(a), rg)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::ln);
        let rg = self.needs(&[a]);
        self.push(v, Op::Ln(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::tanh);
        let rg = self.needs(&[a]);
        self.push(v, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        let rg = self.needs(&[a]);
        self.push(v, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        let rg = self.needs(&[a]);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        let rg = self.needs(&[a]);
        self.push(v, Op::Clamp(a, lo, hi), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let rg = self.needs(&[a, b]);
        self.push(v, Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        let rg = self.needs(&[a]);
        self.push(v, Op::Transpose(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Tensor2::scalar(self.value(a).sum());
        let rg = self.needs(&[a]);
        self.push(v, Op::SumAll(a), rg)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let v = Tensor2::scalar(self.value(a).mean());
        let rg = self.needs(&[a]);
        self.push(v, Op::MeanAll(a), rg)
    }

    /// Mean over rows, result is 1 x cols.
    pub fn col_mean(&mut self, a: Var) -> Var {
        let v = self.value(a).col_mean();
        let rg = self.needs(&[a]);
        self.push(v, Op::ColMean(a), rg)
    }

    /// [B×k] + broadcast [1×k] row.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(r));
        assert_eq!(rv.rows, 1, "row operand must be 1 x k");
        assert_eq!(av.cols, rv.cols, "broadcast width mismatch");
        let mut v = av.clone();
        for i in 0..v.rows {
            for j in 0..v.cols {
                v.data[i * v.cols + j] += rv.data[j];
            }
        }
        let rg = self.needs(&[a, r]);
        self.push(v, Op::AddRow(a, r), rg)
    }

    /// [B×k] - broadcast [1×k] row.
    pub fn sub_row(&mut self, a: Var, r: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(r));
        assert_eq!(rv.rows, 1, "row operand must be 1 x k");
        assert_eq!(av.cols, rv.cols, "broadcast width mismatch");
        let mut v = av.clone();
        for i in 0..v.rows {
            for j in 0..v.cols {
                v.data[i * v.cols + j] -= rv.data[j];
            }
        }
        let rg = self.needs(&[a, r]);
        self.push(v, Op::SubRow(a, r), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.rows, bv.rows, "row count mismatch in concat_cols");
        let cols = av.cols + bv.cols;
        let mut data = Vec::with_capacity(av.rows * cols);
        for r in 0..av.rows {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let v = Tensor2::new(av.rows, cols, data);
        let rg = self.needs(&[a, b]);
        self.push(v, Op::ConcatCols(a, b), rg)
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols, bv.cols, "col count mismatch in concat_rows");
        let mut data = av.data.clone();
        data.extend_from_slice(&bv.data);
        let v = Tensor2::new(av.rows + bv.rows, av.cols, data);
        let rg = self.needs(&[a, b]);
        self.push(v, Op::ConcatRows(a, b), rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.cols, "column slice out of range");
        let mut data = Vec::with_capacity(av.rows * len);
        for r in 0..av.rows {
            data.extend_from_slice(&av.row(r)[start..start + len]);
        }
        let v = Tensor2::new(av.rows, len, data);
        let rg = self.needs(&[a]);
        self.push(v, Op::SliceCols(a, start, len), rg)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = self.value(a);
        assert!(start + len <= av.rows, "row slice out of range");
        let data = av.data[start * av.cols..(start + len) * av.cols].to_vec();
        let v = Tensor2::new(len, av.cols, data);
        let rg = self.needs(&[a]);
        self.push(v, Op::SliceRows(a, start, len), rg)
    }

    /// Row-major reinterpretation with the same element count.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let av = self.value(a);
        assert_eq!(av.len(), rows * cols, "reshape must preserve element count");
        let v = Tensor2::new(rows, cols, av.data.clone());
        let rg = self.needs(&[a]);
        self.push(v, Op::Reshape(a), rg)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        assert!(av.cols >= 1, "softmax over empty rows");
        let mut v = Tensor2::zeros(av.rows, av.cols);
        for r in 0..av.rows {
            let p = softmax_row(av.row(r)).expect("non-empty row");
            v.data[r * av.cols..(r + 1) * av.cols].copy_from_slice(&p);
        }
        let rg = self.needs(&[a]);
        self.push(v, Op::SoftmaxRows(a), rg)
    }

    /// Max over all entries; gradient routes to the first maximal entry.
    pub fn max_all(&mut self, a: Var) -> Var {
        let (m, _) = self.value(a).argmax();
        let rg = self.needs(&[a]);
        self.push(Tensor2::scalar(m), Op::MaxAll(a), rg)
    }

    pub fn min_all(&mut self, a: Var) -> Var {
        let (m, _) = self.value(a).argmin();
        let rg = self.needs(&[a]);
        self.push(Tensor2::scalar(m), Op::MinAll(a), rg)
    }

    // Composite helpers built from the primitives above.

    /// x W + broadcast bias row.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    /// Σ M_ij² as a scalar node.
    pub fn frobenius_sq(&mut self, m: Var) -> Var {
        let sq = self.mul(m, m);
        self.sum_all(sq)
    }

    /// Euclidean norm of all entries, √(Σ x²).
    pub fn l2_norm(&mut self, x: Var) -> Var {
        let sq = self.mul(x, x);
        let s = self.sum_all(sq);
        self.sqrt(s)
    }

    /// k-th central moment per column as a 1 x cols node.
    pub fn central_moment(&mut self, x: Var, k: i32) -> Var {
        assert!(k >= 2, "central moment order must be >= 2");
        let mu = self.col_mean(x);
        let centered = self.sub_row(x, mu);
        let pk = self.powi(centered, k);
        self.col_mean(pk)
    }

    /// Reverse pass from a scalar root. Nodes off the path keep zero gradient.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(
            self.value(root).shape(),
            (1, 1),
            "backward root must be a scalar"
        );
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor2>> = (0..n).map(|_| None).collect();
        grads[root.0] = Some(Tensor2::scalar(1.0));

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].clone() else { continue };
            self.accumulate_parents(i, &g, &mut grads);
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        Gradients { grads, shapes }
    }

    fn accumulate_parents(&self, i: usize, g: &Tensor2, grads: &mut [Option<Tensor2>]) {
        let acc = |grads: &mut [Option<Tensor2>], v: Var, delta: Tensor2| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };

        match self.nodes[i].op.clone() {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, a, g.clone());
                acc(grads, b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, a, g.clone());
                acc(grads, b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                let da = g.zip_map(&self.nodes[b.0].value, |gv, bv| gv * bv);
                let db = g.zip_map(&self.nodes[a.0].value, |gv, av| gv * av);
                acc(grads, a, da);
                acc(grads, b, db);
            }
            Op::AddConst(a) => acc(grads, a, g.clone()),
            Op::Scale(a, c) => acc(grads, a, g.scale(c)),
            Op::Recip(a) => {
                let y = &self.nodes[i].value; // y = 1/x, dy/dx = -y²
                let da = g.zip_map(y, |gv, yv| -gv * yv * yv);
                acc(grads, a, da);
            }
            Op::PowI(a, k) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| gv * k as f64 * xv.powi(k - 1));
                acc(grads, a, da);
            }
            Op::Sqrt(a) => {
                let y = &self.nodes[i].value;
                let da = g.zip_map(y, |gv, yv| gv * 0.5 / yv.max(1e-150));
                acc(grads, a, da);
            }
            Op::Ln(a) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| gv / xv);
                acc(grads, a, da);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[i].value;
                let da = g.zip_map(y, |gv, yv| gv * (1.0 - yv * yv));
                acc(grads, a, da);
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[i].value;
                let da = g.zip_map(y, |gv, yv| gv * yv * (1.0 - yv));
                acc(grads, a, da);
            }
            Op::Relu(a) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                acc(grads, a, da);
            }
            Op::Clamp(a, lo, hi) => {
                let x = &self.nodes[a.0].value;
                let da = g.zip_map(x, |gv, xv| if xv > lo && xv < hi { gv } else { 0.0 });
                acc(grads, a, da);
            }
            Op::MatMul(a, b) => {
                let bt = self.nodes[b.0].value.transpose();
                let at = self.nodes[a.0].value.transpose();
                acc(grads, a, g.matmul(&bt));
                acc(grads, b, at.matmul(g));
            }
            Op::Transpose(a) => acc(grads, a, g.transpose()),
            Op::SumAll(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                acc(grads, a, Tensor2::filled(r, c, g.data[0]));
            }
            Op::MeanAll(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                acc(grads, a, Tensor2::filled(r, c, g.data[0] / (r * c) as f64));
            }
            Op::ColMean(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let mut da = Tensor2::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        da.data[i * c + j] = g.data[j] / r as f64;
                    }
                }
                acc(grads, a, da);
            }
            Op::AddRow(a, rv) => {
                acc(grads, a, g.clone());
                acc(grads, rv, g.col_sum());
            }
            Op::SubRow(a, rv) => {
                acc(grads, a, g.clone());
                acc(grads, rv, g.col_sum().scale(-1.0));
            }
            Op::ConcatCols(a, b) => {
                let ca = self.nodes[a.0].value.cols;
                let cb = self.nodes[b.0].value.cols;
                let rows = g.rows;
                let mut da = Tensor2::zeros(rows, ca);
                let mut db = Tensor2::zeros(rows, cb);
                for r in 0..rows {
                    da.data[r * ca..(r + 1) * ca].copy_from_slice(&g.row(r)[..ca]);
                    db.data[r * cb..(r + 1) * cb].copy_from_slice(&g.row(r)[ca..]);
                }
                acc(grads, a, da);
                acc(grads, b, db);
            }
            Op::ConcatRows(a, b) => {
                let ra = self.nodes[a.0].value.rows;
                let rb = self.nodes[b.0].value.rows;
                let cols = g.cols;
                let da = Tensor2::new(ra, cols, g.data[..ra * cols].to_vec());
                let db = Tensor2::new(rb, cols, g.data[ra * cols..].to_vec());
                acc(grads, a, da);
                acc(grads, b, db);
            }
            Op::SliceCols(a, start, len) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let mut da = Tensor2::zeros(r, c);
                for i in 0..r {
                    for j in 0..len {
                        da.data[i * c + start + j] = g.data[i * len + j];
                    }
                }
                acc(grads, a, da);
            }
            Op::SliceRows(a, start, _len) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let mut da = Tensor2::zeros(r, c);
                da.data[start * c..start * c + g.data.len()].copy_from_slice(&g.data);
                acc(grads, a, da);
            }
            Op::Reshape(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                acc(grads, a, Tensor2::new(r, c, g.data.clone()));
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[i].value;
                let (r, c) = y.shape();
                let mut da = Tensor2::zeros(r, c);
                for row in 0..r {
                    let gr = &g.data[row * c..(row + 1) * c];
                    let yr = y.row(row);
                    let dot: f64 = gr.iter().zip(yr).map(|(gv, yv)| gv * yv).sum();
                    for j in 0..c {
                        da.data[row * c + j] = (gr[j] - dot) * yr[j];
                    }
                }
                acc(grads, a, da);
            }
            Op::MaxAll(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let (_, idx) = self.nodes[a.0].value.argmax();
                let mut da = Tensor2::zeros(r, c);
                da.data[idx] = g.data[0];
                acc(grads, a, da);
            }
            Op::MinAll(a) => {
                let (r, c) = self.nodes[a.0].value.shape();
                let (_, idx) = self.nodes[a.0].value.argmin();
                let mut da = Tensor2::zeros(r, c);
                da.data[idx] = g.data[0];
                acc(grads, a, da);
            }
        }
    }
}

/// Gradients keyed by tape index. Untouched nodes report a zero gradient.
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn grad(&self, v: Var) -> Tensor2 {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor2::zeros(r, c)
            }
        }
    }
}
