//! Dense complex tensors and the handful of kernels the simulators are built
//! on: pairwise contraction, truncated SVD, Kronecker products and the matrix
//! exponential.
//!
//! Storage is row-major: for shape `[d0, d1, ..., dk]` the element at
//! `[i0, i1, ..., ik]` lives at `((i0 * d1 + i1) * d2 + ...) * dk + ik`.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::{Inverse, JobSvd, SVDDC, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

fn volume(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if volume(&shape) != data.len() {
            return Err(Error::Dimension(format!(
                "shape {:?} holds {} scalars but {} were given",
                shape,
                volume(&shape),
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = volume(&shape);
        Tensor {
            shape,
            data: vec![ZERO; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = ONE;
        }
        t
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n = volume(&shape);
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Tensor { shape, data }
    }

    /// Square matrix from nested rows; handy for small literal operators.
    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Tensor::new(vec![r, c], rows.iter().flat_map(|row| row.iter().copied()).collect())
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut t = Tensor::zeros(vec![n, n]);
        for (i, v) in values.iter().enumerate() {
            t.data[i * n + i] = *v;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: C64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                assert!(i < d, "index {i} out of bounds for extent {d}");
                acc * d + i
            })
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical(format!(
                "non-finite entry in tensor of shape {:?}",
                self.shape
            )))
        }
    }

    /// Reinterpret the stored sequence under a new shape.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        if volume(&shape) != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    /// Reorder axes so that axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if axes.len() != r || axes.iter().any(|&a| a >= r || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::Dimension(format!(
                "{axes:?} is not a permutation of {r} axes"
            )));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.shape);
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| old_strides[a]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; r];
        let mut src = 0usize;
        for _ in 0..n {
            data.push(self.data[src]);
            for k in (0..r).rev() {
                idx[k] += 1;
                src += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                src -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Ok(Tensor {
            shape: new_shape,
            data,
        })
    }

    pub fn scale(mut self, factor: C64) -> Self {
        self.data.iter_mut().for_each(|z| *z *= factor);
        self
    }

    pub fn conj(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn require_matrix(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            s => Err(Error::Dimension(format!("{what} needs a rank-2 tensor, got shape {s:?}"))),
        }
    }

    pub fn transpose(&self) -> Result<Self> {
        self.require_matrix("transpose")?;
        self.permute(&[1, 0])
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Result<Self> {
        Ok(self.transpose()?.conj())
    }

    pub fn trace(&self) -> Result<C64> {
        let (r, c) = self.require_matrix("trace")?;
        if r != c {
            return Err(Error::Dimension(format!("trace of non-square {r}x{c}")));
        }
        Ok((0..r).map(|i| self.data[i * c + i]).sum())
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Self> {
        let (_, k1) = self.require_matrix("matmul")?;
        let (k2, _) = other.require_matrix("matmul")?;
        if k1 != k2 {
            return Err(Error::Dimension(format!(
                "matmul inner extents differ: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor::from_array2(self.view2().dot(&other.view2())))
    }

    /// Matrix-vector product for a rank-2 `self` and rank-1 `v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let (r, c) = self.require_matrix("apply")?;
        if c != v.len() {
            return Err(Error::Dimension(format!(
                "cannot apply {r}x{c} matrix to vector of length {}",
                v.len()
            )));
        }
        Ok((0..r)
            .map(|i| {
                self.data[i * c..(i + 1) * c]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub(crate) fn view2(&self) -> ArrayView2<'_, C64> {
        let (r, c) = self.require_matrix("view").expect("rank-2 tensor");
        ArrayView2::from_shape((r, c), &self.data).expect("contiguous row-major storage")
    }

    pub(crate) fn to_array2(&self) -> Array2<C64> {
        self.view2().to_owned()
    }

    pub(crate) fn from_array2(a: Array2<C64>) -> Self {
        let shape = vec![a.nrows(), a.ncols()];
        let data = if a.is_standard_layout() {
            a.into_raw_vec_and_offset().0
        } else {
            a.iter().copied().collect()
        };
        Tensor { shape, data }
    }
}

/// Sum over the paired axes of `a` and `b`. The result carries the free axes
/// of `a` followed by the free axes of `b`, each in their original order.
pub fn contract(a: &Tensor, b: &Tensor, axis_pairs: &[(usize, usize)]) -> Result<Tensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in axis_pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Dimension(format!(
                "axis pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "paired extents differ: a axis {ia} has {}, b axis {ib} has {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        if std::mem::replace(&mut used_a[ia], true) || std::mem::replace(&mut used_b[ib], true) {
            return Err(Error::Dimension(format!("axis reused in pair ({ia}, {ib})")));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&k| !used_b[k]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(axis_pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axis_pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();

    let rows: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let inner: usize = axis_pairs.iter().map(|p| a.shape[p.0]).product();
    let cols: usize = free_b.iter().map(|&k| b.shape[k]).product();

    let am = a.permute(&perm_a)?.reshape(vec![rows, inner])?;
    let bm = b.permute(&perm_b)?.reshape(vec![inner, cols])?;
    let out = am.matmul(&bm)?;

    let shape = free_a
        .iter()
        .map(|&k| a.shape[k])
        .chain(free_b.iter().map(|&k| b.shape[k]))
        .collect();
    out.reshape(shape)
}

/// Kronecker product with `(a ⊗ b)[i·p + k, j·q + l] = a[i, j]·b[k, l]`.
pub fn kron(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, n) = a.require_matrix("kron")?;
    let (p, q) = b.require_matrix("kron")?;
    let mut out = Tensor::zeros(vec![m * p, n * q]);
    let w = n * q;
    for i in 0..m {
        for j in 0..n {
            let aij = a.data[i * n + j];
            if aij == ZERO {
                continue;
            }
            for k in 0..p {
                let row = (i * p + k) * w + j * q;
                for l in 0..q {
                    out.data[row + l] = aij * b.data[k * q + l];
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Singular values below `schmidt_cutoff * s_max` are dropped.
    pub schmidt_cutoff: f64,
    pub chi_max: usize,
}

impl TruncationPolicy {
    pub fn new(schmidt_cutoff: f64, chi_max: usize) -> Result<Self> {
        let p = TruncationPolicy {
            schmidt_cutoff,
            chi_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Keep everything up to `chi_max`.
    pub fn exact(chi_max: usize) -> Self {
        TruncationPolicy {
            schmidt_cutoff: 0.0,
            chi_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.schmidt_cutoff >= 0.0 && self.schmidt_cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schmidt_cutoff must be finite and >= 0, got {}",
                self.schmidt_cutoff
            )));
        }
        if self.chi_max < 1 {
            return Err(Error::InvalidParameter("chi_max must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            schmidt_cutoff: 1e-5,
            chi_max: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// `rows × k` with orthonormal columns.
    pub u: Tensor,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    /// `k × cols` with orthonormal rows.
    pub v: Tensor,
    pub discarded_weight: f64,
    /// The relative cutoff removed at least one value.
    pub hit_cutoff: bool,
    /// `chi_max` removed at least one value the cutoff would have kept.
    pub hit_chi_max: bool,
}

impl TruncatedSvd {
    /// `u · diag(s) · v`.
    pub fn reconstruct(&self) -> Tensor {
        let mut us = self.u.clone();
        let k = self.s.len();
        for row in us.data.chunks_mut(k) {
            for (z, &s) in row.iter_mut().zip(&self.s) {
                *z *= s;
            }
        }
        us.matmul(&self.v).expect("consistent factor shapes")
    }
}

fn raw_svd(m: &Tensor) -> Result<(Array2<C64>, Vec<f64>, Array2<C64>)> {
    let (rows, cols) = m.require_matrix("svd")?;
    let a = m.to_array2();
    if let Ok((Some(u), s, Some(vt))) = a.svddc(JobSvd::Some) {
        return Ok((u, s.to_vec(), vt));
    }
    // divide-and-conquer occasionally fails where the QR iteration does not
    match a.svd(true, true) {
        Ok((Some(u), s, Some(vt))) => {
            let k = s.len();
            let u = u.slice(ndarray::s![.., ..k]).to_owned();
            let vt = vt.slice(ndarray::s![..k, ..]).to_owned();
            Ok((u, s.to_vec(), vt))
        }
        _ => Err(Error::SvdNonConvergence { rows, cols }),
    }
}

/// Thin SVD of `m`, truncated under `policy`. At least one singular value is
/// always retained.
pub fn svd_truncate(m: &Tensor, policy: &TruncationPolicy) -> Result<TruncatedSvd> {
    policy.validate()?;
    m.check_finite()?;
    let (rows, cols) = m.require_matrix("svd_truncate")?;
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("svd of empty {rows}x{cols} matrix")));
    }
    let (u, s, vt) = raw_svd(m)?;

    let s_max = s.first().copied().unwrap_or(0.0);
    let threshold = policy.schmidt_cutoff * s_max;
    let by_cutoff = s.iter().take_while(|&&x| x >= threshold && x > 0.0).count().max(1);
    let keep = by_cutoff.min(policy.chi_max);

    let total: f64 = s.iter().map(|x| x * x).sum();
    let dropped: f64 = s[keep..].iter().map(|x| x * x).sum();
    let discarded_weight = if total > 0.0 { dropped / total } else { 0.0 };

    let u = Tensor::from_array2(u.slice(ndarray::s![.., ..keep]).to_owned());
    let v = Tensor::from_array2(vt.slice(ndarray::s![..keep, ..]).to_owned());
    let out = TruncatedSvd {
        u,
        s: s[..keep].to_vec(),
        v,
        discarded_weight,
        hit_cutoff: by_cutoff < s.len(),
        hit_chi_max: keep < by_cutoff,
    };
    out.u.check_finite()?;
    out.v.check_finite()?;
    Ok(out)
}

/// Thin QR factorization `m = q · r` via Householder reflections, with `q`
/// having orthonormal columns.
pub fn qr(m: &Tensor) -> Result<(Tensor, Tensor)> {
    use ndarray_linalg::QR;
    m.require_matrix("qr")?;
    let (q, r) = m
        .to_array2()
        .qr()
        .map_err(|e| Error::Numerical(format!("QR failed: {e}")))?;
    Ok((Tensor::from_array2(q), Tensor::from_array2(r)))
}

/// Eigenvalues (ascending) of the Hermitian part of a square matrix.
pub fn hermitian_eigvals(m: &Tensor) -> Result<Vec<f64>> {
    use ndarray_linalg::{EigValsh, UPLO};
    let (r, c) = m.require_matrix("hermitian_eigvals")?;
    if r != c {
        return Err(Error::Dimension(format!("eigenvalues of non-square {r}x{c}")));
    }
    let a = m.to_array2();
    let herm = (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let ev = herm
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e}")))?;
    Ok(ev.to_vec())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &Array2<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &Tensor) -> Result<Tensor> {
    let (r, c) = a.require_matrix("expm")?;
    if r != c {
        return Err(Error::Dimension(format!("expm of non-square {r}x{c} matrix")));
    }
    a.check_finite()?;
    let n = r;
    let mut x = a.to_array2();
    let nrm = norm1(&x);
    let squarings = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 0 {
        let f = C64::from(2f64.powi(-squarings));
        x.mapv_inplace(|z| z * f);
    }
    let ident = Array2::<C64>::eye(n);
    let x2 = x.dot(&x);
    let x4 = x2.dot(&x2);
    let x6 = x4.dot(&x2);
    let b = |k: usize| C64::from(PADE13[k]);

    let u_inner = &x6 * b(13) + &x4 * b(11) + &x2 * b(9);
    let u_tail = &x6 * b(7) + &x4 * b(5) + &x2 * b(3) + &ident * b(1);
    let u = x.dot(&(x6.dot(&u_inner) + u_tail));

    let v_inner = &x6 * b(12) + &x4 * b(10) + &x2 * b(8);
    let v = x6.dot(&v_inner) + &x6 * b(6) + &x4 * b(4) + &x2 * b(2) + &ident * b(0);

    let denom = (&v - &u)
        .inv()
        .map_err(|e| Error::Numerical(format!("expm Padé denominator is singular: {e}")))?;
    let mut result = denom.dot(&(&v + &u));
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    let out = Tensor::from_array2(result);
    out.check_finite()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> Tensor {
        Tensor::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]).unwrap()
    }

    fn sigma_z() -> Tensor {
        Tensor::diag(&[ONE, -ONE])
    }

    fn max_diff(a: &Tensor, b: &Tensor) -> f64 {
        assert_eq!(a.shape(), b.shape());
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn new_rejects_bad_volume_and_nan() {
        assert!(Tensor::new(vec![2, 2], vec![ONE; 3]).is_err());
        assert!(Tensor::new(vec![1], vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn reshape_keeps_sequence() {
        let t = Tensor::from_fn(vec![2, 3], |i| c((i[0] * 3 + i[1]) as f64, 0.0));
        let before = t.data().to_vec();
        let r = t.reshape(vec![3, 2]).unwrap();
        assert_eq!(r.data(), before.as_slice());
        assert!(r.reshape(vec![5]).is_err());
    }

    #[test]
    fn permute_matches_index_formula() {
        let t = Tensor::from_fn(vec![2, 3, 4], |i| c(i[0] as f64, (i[1] * 10 + i[2]) as f64));
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for d in 0..4 {
                    assert_eq!(p.get(&[d, a, b]), t.get(&[a, b, d]));
                }
            }
        }
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn identity_contraction_returns_vector() {
        let v = Tensor::new(vec![2], vec![c(1.0, 2.0), c(-3.0, 0.5)]).unwrap();
        let out = contract(&Tensor::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn contract_matches_index_sum() {
        let a = Tensor::from_fn(vec![2, 3], |i| c(i[0] as f64 + 1.0, i[1] as f64 - 1.0));
        let b = Tensor::from_fn(vec![3, 4], |i| c((i[0] * i[1]) as f64, 0.5 * i[1] as f64));
        let out = contract(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2, 4]);
        for i in 0..2 {
            for j in 0..4 {
                let expected: C64 = (0..3).map(|k| a.get(&[i, k]) * b.get(&[k, j])).sum();
                assert_abs_diff_eq!((out.get(&[i, j]) - expected).norm(), 0.0, epsilon = 1e-14);
            }
        }
        // one entry by hand: row 0 of a = (1-i, 1, 1+i), column 1 of b = (0.5i, 1+0.5i, 2+0.5i)
        let hand = c(1.0, -1.0) * c(0.0, 0.5) + c(1.0, 0.0) * c(1.0, 0.5) + c(1.0, 1.0) * c(2.0, 0.5);
        assert_abs_diff_eq!((out.get(&[0, 1]) - hand).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn contract_free_axis_order() {
        let a = Tensor::from_fn(vec![2, 3, 4], |i| c((i[0] + 2 * i[1] + 7 * i[2]) as f64, 1.0));
        let b = Tensor::from_fn(vec![4, 5, 2], |i| c(i[0] as f64, (i[1] + i[2]) as f64));
        let out = contract(&a, &b, &[(2, 0), (0, 2)]).unwrap();
        assert_eq!(out.shape(), &[3, 5]);
        for j in 0..3 {
            for l in 0..5 {
                let mut s = ZERO;
                for x in 0..2 {
                    for y in 0..4 {
                        s += a.get(&[x, j, y]) * b.get(&[y, l, x]);
                    }
                }
                assert_abs_diff_eq!((out.get(&[j, l]) - s).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn contract_full_gives_frobenius_norm() {
        let a = Tensor::from_fn(vec![2, 3], |i| c(i[0] as f64 - 0.5, i[1] as f64));
        let out = contract(&a, &a.conj(), &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(out.shape(), &[] as &[usize]);
        let v = out.data()[0];
        assert!(v.re >= 0.0);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.re, a.frobenius_norm().powi(2), epsilon = 1e-12);
    }

    #[test]
    fn contract_extent_mismatch_is_error() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Dimension(_))));
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&Tensor::identity(2), &Tensor::identity(2)).unwrap(), Tensor::identity(4));
        let zi = kron(&sigma_z(), &Tensor::identity(2)).unwrap();
        assert_eq!(zi, Tensor::diag(&[ONE, ONE, -ONE, -ONE]));
        let a = Tensor::new(vec![2, 2], vec![c(1.0, 2.0), c(0.3, 0.0), c(-1.0, 0.0), c(0.5, -0.5)]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![c(2.0, 0.0), c(0.0, 1.0), c(4.0, 0.0), c(-3.0, 1.0)]).unwrap();
        let k = kron(&a, &b).unwrap();
        let lhs = k.trace().unwrap();
        let rhs = a.trace().unwrap() * b.trace().unwrap();
        assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-14);
        // block convention
        assert_eq!(k.get(&[1 * 2 + 0, 0 * 2 + 1]), a.get(&[1, 0]) * b.get(&[0, 1]));
    }

    #[test]
    fn svd_identity_keeps_all() {
        let out = svd_truncate(&Tensor::identity(4), &TruncationPolicy::default()).unwrap();
        assert_eq!(out.s.len(), 4);
        for s in &out.s {
            assert_abs_diff_eq!(*s, 1.0, epsilon = 1e-14);
        }
        assert_eq!(out.discarded_weight, 0.0);
    }

    #[test]
    fn svd_rank_one_exact() {
        let u = [c(1.0, 0.5), c(-2.0, 0.0), c(0.0, 1.0)];
        let v = [c(0.5, 0.0), c(1.0, -1.0)];
        let m = Tensor::from_fn(vec![3, 2], |i| u[i[0]] * v[i[1]]);
        let out = svd_truncate(&m, &TruncationPolicy::new(1e-5, 1).unwrap()).unwrap();
        assert_eq!(out.s.len(), 1);
        assert!(out.discarded_weight < 1e-28);
        assert!(max_diff(&out.reconstruct(), &m) < 1e-13);
    }

    #[test]
    fn svd_relative_cutoff_discards_small_value() {
        let m = Tensor::diag(&[ONE, c(1e-6, 0.0)]);
        let out = svd_truncate(&m, &TruncationPolicy::new(1e-5, 200).unwrap()).unwrap();
        assert_eq!(out.s.len(), 1);
        let expected = 1e-12 / (1.0 + 1e-12);
        assert_abs_diff_eq!(out.discarded_weight, expected, epsilon = 1e-24);
        assert!(out.hit_cutoff && !out.hit_chi_max);
    }

    #[test]
    fn svd_zero_matrix_keeps_one() {
        let out = svd_truncate(&Tensor::zeros(vec![3, 3]), &TruncationPolicy::default()).unwrap();
        assert_eq!(out.s.len(), 1);
        assert_eq!(out.discarded_weight, 0.0);
    }

    #[test]
    fn expm_zero_and_diagonal() {
        let z = expm(&Tensor::zeros(vec![3, 3])).unwrap();
        assert!(max_diff(&z, &Tensor::identity(3)) < 1e-15);
        let d = expm(&Tensor::diag(&[c(0.3, 0.0), c(-2.0, 1.0)])).unwrap();
        let expected = Tensor::diag(&[c(0.3, 0.0).exp(), c(-2.0, 1.0).exp()]);
        assert!(max_diff(&d, &expected) < 1e-14);
    }

    #[test]
    fn expm_pauli_rotation_closed_form() {
        // exp(-iθσx) = cos θ I - i sin θ σx
        for theta in [0.1, 1.3, 7.5, 40.0] {
            let g = sigma_x().scale(c(0.0, -theta));
            let e = expm(&g).unwrap();
            let expected = Tensor::identity(2)
                .scale(c(theta.cos(), 0.0))
                .add(&sigma_x().scale(c(0.0, -theta.sin())))
                .unwrap();
            assert!(max_diff(&e, &expected) < 1e-12 * (1.0 + theta), "theta={theta}");
        }
    }

    #[test]
    fn expm_rejects_non_square() {
        assert!(matches!(expm(&Tensor::zeros(vec![2, 3])), Err(Error::Dimension(_))));
    }

    #[test]
    fn qr_reconstructs() {
        let m = Tensor::from_fn(vec![6, 3], |i| c((i[0] * 3 + i[1]) as f64 % 5.0, (i[0] + 1) as f64 * 0.1));
        let (q, r) = qr(&m).unwrap();
        assert_eq!(q.shape(), &[6, 3]);
        assert!(max_diff(&q.matmul(&r).unwrap(), &m) < 1e-12);
        let qq = q.adjoint().unwrap().matmul(&q).unwrap();
        assert!(max_diff(&qq, &Tensor::identity(3)) < 1e-12);
    }
}
