//! Tensor-level reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass together with its
//! output value. [`Tape::backward`] then walks the records in reverse and
//! accumulates gradients for the parameter leaves into a gradient buffer laid
//! out like the owning [`ParamStore`].

use std::sync::Arc;

use super::ops::sigmoid;
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    /// `a [m,k] * b[n,k]^T`
    MatMulT(Var, Var),
    /// `a [m,k] * x [k]`
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a [m,n] + row [n]` broadcast over rows
    AddRow(Var, Var),
    /// `a [m,n] + col [m]` broadcast over columns
    AddCol(Var, Var),
    /// `a + s`, with `s` one element
    AddScalar(Var, Var),
    /// `s * a`, with `s` one element
    Scale(Var, Var),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Square(Var),
    /// contiguous range of a vector
    Slice(Var, usize),
    Gather(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    /// softmax of a vector within groups given by a segment id per element
    SegmentSoftmax(Var, Arc<[usize]>, usize),
    /// `a [e,n]` with row `i` multiplied by `c[i]`
    ScaleRows(Var, Var),
    /// column sums of a matrix, or the sum of a vector
    SumRows(Var),
    Dot(Var, Var),
    Mean(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_strides: (isize, isize), b: &[f64], b_strides: (isize, isize), c: &mut [f64], beta: f64) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    // SAFETY: slice lengths cover every index addressed by the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dims2(t: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    match t.shape() {
        [m, n] => Ok((*m, *n)),
        s => Err(Error::shape(op, format!("expected a matrix, got shape {s:?}"))),
    }
}

fn is_single(t: &Tensor) -> bool {
    t.len() == 1
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Const)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.value(a), "matmul_t")?;
        let (n, k2) = dims2(self.value(b), "matmul_t")?;
        if k != k2 {
            return Err(Error::shape("matmul_t", format!("[{m},{k}] x [{n},{k2}]^T")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            (k as isize, 1),
            self.value(b).data(),
            (1, k as isize),
            &mut out,
            0.0,
        );
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMulT(a, b)))
    }

    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        let (m, k) = dims2(self.value(a), "matvec")?;
        if self.value(x).rank() != 1 || self.value(x).len() != k {
            return Err(Error::shape(
                "matvec",
                format!("[{m},{k}] times {:?}", self.value(x).shape()),
            ));
        }
        let av = self.value(a);
        let xv = self.value(x).data();
        let out: Vec<f64> = (0..m).map(|i| av.row(i).iter().zip(xv).map(|(p, q)| p * q).sum()).collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(a, x)))
    }

    fn elementwise(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (av, bv) = (self.value(a), self.value(b));
        if !av.same_shape(bv) {
            return Err(Error::shape(name, format!("{:?} vs {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(av.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.elementwise(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.elementwise(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.elementwise(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(a), "add_row")?;
        let r = self.value(row);
        if r.rank() != 1 || r.len() != n {
            return Err(Error::shape("add_row", format!("[{m},{n}] + {:?}", r.shape())));
        }
        let mut out = self.value(a).clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += r.data()[i % n];
        }
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    pub fn add_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (m, n) = dims2(self.value(a), "add_col")?;
        let c = self.value(col);
        if c.rank() != 1 || c.len() != m {
            return Err(Error::shape("add_col", format!("[{m},{n}] + col {:?}", c.shape())));
        }
        let mut out = self.value(a).clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x += c.data()[i / n];
        }
        Ok(self.push(out, Op::AddCol(a, col)))
    }

    pub fn add_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if !is_single(self.value(s)) {
            return Err(Error::shape("add_scalar", format!("scalar has shape {:?}", self.value(s).shape())));
        }
        let k = self.value(s).item();
        let out = self.value(a).map(|x| x + k);
        Ok(self.push(out, Op::AddScalar(a, s)))
    }

    pub fn scale(&mut self, s: Var, a: Var) -> Result<Var> {
        if !is_single(self.value(s)) {
            return Err(Error::shape("scale", format!("scalar has shape {:?}", self.value(s).shape())));
        }
        let k = self.value(s).item();
        let out = self.value(a).map(|x| k * x);
        Ok(self.push(out, Op::Scale(s, a)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).map(|x| super::ops::leaky_relu(x, slope));
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 || start + len > av.len() {
            return Err(Error::shape(
                "slice",
                format!("{start}..{} of {:?}", start + len, av.shape()),
            ));
        }
        let out = Tensor::vector(av.data()[start..start + len].to_vec());
        Ok(self.push(out, Op::Slice(a, start)))
    }

    /// Rows (or elements, for a vector) of `a` at `idx`.
    pub fn gather(&mut self, a: Var, idx: Arc<[usize]>) -> Result<Var> {
        let av = self.value(a);
        let rows = av.rows();
        let w = av.row_len();
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("gather", format!("index {bad} out of {rows} rows")));
        }
        let mut data = Vec::with_capacity(idx.len() * w);
        for &i in idx.iter() {
            data.extend_from_slice(av.row(i));
        }
        let mut shape = av.shape().to_vec();
        shape[0] = idx.len();
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::Gather(a, idx)))
    }

    /// Sums row `i` of `a` into row `idx[i]` of a `segments`-row output.
    pub fn scatter_add(&mut self, a: Var, idx: Arc<[usize]>, segments: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rows() != idx.len() {
            return Err(Error::shape(
                "scatter_add",
                format!("{} rows but {} indices", av.rows(), idx.len()),
            ));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= segments) {
            return Err(Error::shape("scatter_add", format!("index {bad} out of {segments}")));
        }
        let w = av.row_len();
        let mut data = vec![0.0; segments * w];
        for (r, &i) in idx.iter().enumerate() {
            for (o, &x) in data[i * w..(i + 1) * w].iter_mut().zip(av.row(r)) {
                *o += x;
            }
        }
        let mut shape = av.shape().to_vec();
        shape[0] = segments;
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::ScatterAdd(a, idx)))
    }

    /// Softmax of vector `a` independently within each segment.
    pub fn segment_softmax(&mut self, a: Var, seg: Arc<[usize]>, segments: usize) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 1 || av.len() != seg.len() {
            return Err(Error::shape(
                "segment_softmax",
                format!("{:?} with {} segment ids", av.shape(), seg.len()),
            ));
        }
        let mut max = vec![f64::NEG_INFINITY; segments];
        for (&x, &s) in av.data().iter().zip(seg.iter()) {
            if s >= segments {
                return Err(Error::shape("segment_softmax", format!("segment {s} out of {segments}")));
            }
            max[s] = max[s].max(x);
        }
        let mut z = vec![0.0; segments];
        let mut out: Vec<f64> = av
            .data()
            .iter()
            .zip(seg.iter())
            .map(|(&x, &s)| {
                let e = (x - max[s]).exp();
                z[s] += e;
                e
            })
            .collect();
        for (o, &s) in out.iter_mut().zip(seg.iter()) {
            *o /= z[s];
        }
        Ok(self.push(Tensor::vector(out), Op::SegmentSoftmax(a, seg, segments)))
    }

    pub fn scale_rows(&mut self, a: Var, c: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(c));
        if cv.rank() != 1 || cv.len() != av.rows() {
            return Err(Error::shape(
                "scale_rows",
                format!("{:?} rows scaled by {:?}", av.shape(), cv.shape()),
            ));
        }
        let w = av.row_len();
        let mut out = av.clone();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x *= cv.data()[i / w];
        }
        Ok(self.push(out, Op::ScaleRows(a, c)))
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let w = av.row_len();
        let mut out = vec![0.0; w];
        for r in 0..av.rows() {
            for (o, &x) in out.iter_mut().zip(av.row(r)) {
                *o += x;
            }
        }
        self.push(Tensor::vector(out), Op::SumRows(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = super::ops::dot(self.value(a).data(), self.value(b).data())?;
        if !self.value(a).same_shape(self.value(b)) {
            return Err(Error::shape("dot", "operands differ in shape"));
        }
        Ok(self.push(Tensor::scalar(d), Op::Dot(a, b)))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let m = av.data().iter().sum::<f64>() / av.len().max(1) as f64;
        self.push(Tensor::scalar(m), Op::Mean(a))
    }

    /// Reverse sweep from the one-element `loss`; returns a gradient buffer
    /// laid out like `store` (see [`ParamStore::grad_buffer`]).
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Vec<Tensor>> {
        let mut buffer = store.grad_buffer();
        self.backward_into(loss, &mut buffer)?;
        Ok(buffer)
    }

    /// Adds d(loss)/d(param) into `buffer[param]` for every parameter leaf.
    pub fn backward_into(&self, loss: Var, buffer: &mut [Tensor]) -> Result<()> {
        if !is_single(self.value(loss)) {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.axpy(1.0, &g),
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(dout) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Const => {}
                Op::Param(id) => buffer[id.0].axpy(1.0, &dout),
                Op::MatMulT(a, b) => {
                    let (m, k) = dims2(val(*a), "matmul_t")?;
                    let n = val(*b).rows();
                    // dA = dC B ; dB = dC^T A
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, dout.data(), (n as isize, 1), val(*b).data(), (k as isize, 1), &mut da, 0.0);
                    let mut db = vec![0.0; n * k];
                    gemm(n, m, k, dout.data(), (1, n as isize), val(*a).data(), (k as isize, 1), &mut db, 0.0);
                    acc(&mut grads, *a, Tensor::new(vec![m, k], da)?);
                    acc(&mut grads, *b, Tensor::new(vec![n, k], db)?);
                }
                Op::MatVec(a, x) => {
                    let (m, k) = dims2(val(*a), "matvec")?;
                    let xv = val(*x).data();
                    let av = val(*a);
                    let mut da = vec![0.0; m * k];
                    let mut dx = vec![0.0; k];
                    for r in 0..m {
                        let g = dout.data()[r];
                        for c in 0..k {
                            da[r * k + c] = g * xv[c];
                            dx[c] += g * av.data()[r * k + c];
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(vec![m, k], da)?);
                    acc(&mut grads, *x, Tensor::vector(dx));
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, dout.clone());
                    acc(&mut grads, *b, dout);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, dout.map(|x| -x));
                    acc(&mut grads, *a, dout);
                }
                Op::Mul(a, b) => {
                    let da = zip_map(&dout, val(*b), |g, y| g * y);
                    let db = zip_map(&dout, val(*a), |g, x| g * x);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    let n = val(*row).len();
                    let mut dr = vec![0.0; n];
                    for (j, &g) in dout.data().iter().enumerate() {
                        dr[j % n] += g;
                    }
                    acc(&mut grads, *row, Tensor::vector(dr));
                    acc(&mut grads, *a, dout);
                }
                Op::AddCol(a, col) => {
                    let m = val(*col).len();
                    let n = dout.len() / m.max(1);
                    let mut dc = vec![0.0; m];
                    for (j, &g) in dout.data().iter().enumerate() {
                        dc[j / n] += g;
                    }
                    acc(&mut grads, *col, Tensor::vector(dc));
                    acc(&mut grads, *a, dout);
                }
                Op::AddScalar(a, s) => {
                    let total: f64 = dout.data().iter().sum();
                    acc(&mut grads, *s, Tensor::filled(val(*s).shape(), total));
                    acc(&mut grads, *a, dout);
                }
                Op::Scale(s, a) => {
                    let k = val(*s).item();
                    let ds: f64 = dout.data().iter().zip(val(*a).data()).map(|(g, x)| g * x).sum();
                    acc(&mut grads, *s, Tensor::filled(val(*s).shape(), ds));
                    acc(&mut grads, *a, dout.map(|g| g * k));
                }
                Op::Sigmoid(a) => {
                    let d = zip_map(&dout, &node.value, |g, y| g * y * (1.0 - y));
                    acc(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let d = zip_map(&dout, val(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    acc(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let d = zip_map(&dout, val(*a), |g, x| if x >= 0.0 { g } else { g * slope });
                    acc(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let d = zip_map(&dout, val(*a), |g, x| 2.0 * g * x);
                    acc(&mut grads, *a, d);
                }
                Op::Slice(a, start) => {
                    let mut d = Tensor::zeros(val(*a).shape());
                    d.data_mut()[*start..*start + dout.len()].copy_from_slice(dout.data());
                    acc(&mut grads, *a, d);
                }
                Op::Gather(a, idx) => {
                    let av = val(*a);
                    let w = av.row_len();
                    let mut d = Tensor::zeros(av.shape());
                    for (r, &i) in idx.iter().enumerate() {
                        for (o, &g) in d.data_mut()[i * w..(i + 1) * w].iter_mut().zip(dout.row(r)) {
                            *o += g;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ScatterAdd(a, idx) => {
                    let av = val(*a);
                    let w = av.row_len();
                    let mut data = Vec::with_capacity(av.len());
                    for &i in idx.iter() {
                        data.extend_from_slice(&dout.data()[i * w..(i + 1) * w]);
                    }
                    acc(&mut grads, *a, Tensor::new(av.shape().to_vec(), data)?);
                }
                Op::SegmentSoftmax(a, seg, segments) => {
                    let y = node.value.data();
                    let mut inner = vec![0.0; *segments];
                    for ((&yi, &gi), &s) in y.iter().zip(dout.data()).zip(seg.iter()) {
                        inner[s] += yi * gi;
                    }
                    let d: Vec<f64> = y
                        .iter()
                        .zip(dout.data())
                        .zip(seg.iter())
                        .map(|((&yi, &gi), &s)| yi * (gi - inner[s]))
                        .collect();
                    acc(&mut grads, *a, Tensor::vector(d));
                }
                Op::ScaleRows(a, c) => {
                    let (av, cv) = (val(*a), val(*c));
                    let w = av.row_len();
                    let mut da = dout.clone();
                    let mut dc = vec![0.0; cv.len()];
                    for (j, x) in da.data_mut().iter_mut().enumerate() {
                        let r = j / w;
                        dc[r] += *x * av.data()[j];
                        *x *= cv.data()[r];
                    }
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *c, Tensor::vector(dc));
                }
                Op::SumRows(a) => {
                    let av = val(*a);
                    let w = av.row_len();
                    let data = (0..av.len()).map(|j| dout.data()[j % w]).collect();
                    acc(&mut grads, *a, Tensor::new(av.shape().to_vec(), data)?);
                }
                Op::Dot(a, b) => {
                    let g = dout.item();
                    acc(&mut grads, *a, val(*b).map(|y| g * y));
                    acc(&mut grads, *b, val(*a).map(|x| g * x));
                }
                Op::Mean(a) => {
                    let av = val(*a);
                    let g = dout.item() / av.len().max(1) as f64;
                    acc(&mut grads, *a, Tensor::filled(av.shape(), g));
                }
            }
        }
        Ok(())
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_norm_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0])).unwrap();
        let unused = store.add("unused", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.dot(wv, wv).unwrap();
        let g = tape.backward(loss, &store).unwrap();
        assert_eq!(g[w.index()].data(), &[6.0]);
        assert_eq!(g[unused.index()].data(), &[0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let store = ParamStore::new();
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(v, &store), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.matmul_t(a, b), Err(Error::Shape { op: "matmul_t", .. })));
        assert!(matches!(tape.add(a, b), Err(Error::Shape { op: "add", .. })));
        let x = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.matvec(a, x), Err(Error::Shape { op: "matvec", .. })));
    }

    #[test]
    fn matmul_matches_naive() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 3, vec![1., 0., -1., 2., 1., 0.]).unwrap());
        let c = tape.matmul_t(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[-2.0, 4.0, -2.0, 13.0]);
    }

    #[test]
    fn segment_softmax_groups() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![0.3, 0.3, 5.0, -1.0]));
        let seg: Arc<[usize]> = vec![0, 0, 1, 2].into();
        let s = tape.segment_softmax(a, seg, 3).unwrap();
        assert_eq!(tape.value(s).data(), &[0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let run = || {
            let mut tape = Tape::new();
            let a = tape.constant(Tensor::matrix(2, 2, vec![0.1, 0.7, -0.3, 0.2]).unwrap());
            let b = tape.sigmoid(a);
            let c = tape.matmul_t(b, a).unwrap();
            let d = tape.sum_rows(c);
            tape.value(d).clone()
        };
        assert_eq!(run(), run());
    }
}
