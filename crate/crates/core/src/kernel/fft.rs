//! Discrete Fourier transforms.
//!
//! Forward transforms are unnormalized, `X[k] = sum_n x[n] W_N^{kn}` with
//! `W_N = exp(-2 pi i / N)`; inverse transforms carry the `1/N` (1-D) or
//! `1/(MN)` (2-D) factor.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey kernel. Other
//! lengths up to [`DIRECT_MAX`] use a direct DFT over a precomputed twiddle
//! table (the 14 and 7 token grids land here); longer ones go through
//! Bluestein's chirp-z reduction to a power-of-two convolution.

use std::f64::consts::PI;

use num_complex::Complex;

use super::tensor::Scalar;
use crate::error::{ensure, Result};

/// Largest non-power-of-two length served by the direct DFT.
pub const DIRECT_MAX: usize = 32;

/// `exp(-2 pi i k / n)` evaluated in f64, with `k` reduced mod `n` first.
fn root_of_unity(k: usize, n: usize) -> Complex<f64> {
    let angle = -2.0 * PI * ((k % n) as f64) / n as f64;
    Complex::new(libm::cos(angle), libm::sin(angle))
}

fn to_scalar<T: Scalar>(c: Complex<f64>) -> Complex<T> {
    Complex::new(T::lit(c.re), T::lit(c.im))
}

#[derive(Clone, Debug)]
enum Kernel<T> {
    Radix2 { twiddles: Vec<Complex<T>> },
    Direct { table: Vec<Complex<T>> },
    Bluestein { chirp: Vec<Complex<T>>, kernel_spectrum: Vec<Complex<T>>, inner: Box<Fft1d<T>> },
}

/// A 1-D transform plan for a fixed length.
#[derive(Clone, Debug)]
pub struct Fft1d<T> {
    len: usize,
    kernel: Kernel<T>,
}

impl<T: Scalar> Fft1d<T> {
    pub fn new(len: usize) -> Result<Self> {
        ensure(len >= 1, || "fft length must be at least 1".into())?;
        let kernel = if len.is_power_of_two() {
            Kernel::Radix2 {
                twiddles: (0..len / 2).map(|k| to_scalar(root_of_unity(k, len))).collect(),
            }
        } else if len <= DIRECT_MAX {
            Kernel::Direct { table: (0..len).map(|k| to_scalar(root_of_unity(k, len))).collect() }
        } else {
            Self::bluestein(len)?
        };
        Ok(Self { len, kernel })
    }

    fn bluestein(len: usize) -> Result<Kernel<T>> {
        let m = (2 * len - 1).next_power_of_two();
        // chirp[n] = exp(-i pi n^2 / len); n^2 is reduced mod 2*len in integers.
        let chirp64: Vec<Complex<f64>> = (0..len)
            .map(|n| {
                let k = (n as u128 * n as u128 % (2 * len as u128)) as f64;
                let angle = -PI * k / len as f64;
                Complex::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let inner = Fft1d::<T>::new(m)?;
        let mut b = vec![Complex::new(T::zero(), T::zero()); m];
        for n in 0..len {
            let c = to_scalar::<T>(chirp64[n].conj());
            b[n] = c;
            if n > 0 {
                b[m - n] = c;
            }
        }
        inner.forward(&mut b);
        Ok(Kernel::Bluestein {
            chirp: chirp64.into_iter().map(to_scalar).collect(),
            kernel_spectrum: b,
            inner: Box::new(inner),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The twiddle factor `W_N = exp(-2 pi i / N)` of this plan.
    pub fn twiddle_factor(&self) -> Complex<f64> {
        root_of_unity(1, self.len)
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kernel {
            Kernel::Radix2 { twiddles } => radix2(buf, twiddles),
            Kernel::Direct { table } => direct(buf, table),
            Kernel::Bluestein { chirp, kernel_spectrum, inner } => {
                let m = kernel_spectrum.len();
                let mut a = vec![Complex::new(T::zero(), T::zero()); m];
                for n in 0..self.len {
                    a[n] = buf[n] * chirp[n];
                }
                inner.forward(&mut a);
                for (x, k) in a.iter_mut().zip(kernel_spectrum) {
                    *x = *x * *k;
                }
                inner.inverse_unnormalized(&mut a);
                let scale = T::one() / T::lit(m as f64);
                for k in 0..self.len {
                    buf[k] = a[k] * chirp[k] * scale;
                }
            }
        }
    }

    /// In-place transform with `W_N^{-kn}`, without the `1/N` factor.
    pub fn inverse_unnormalized(&self, buf: &mut [Complex<T>]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        for v in buf.iter_mut() {
            *v = v.conj();
        }
    }

    /// In-place inverse transform including `1/N`.
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inverse_unnormalized(buf);
        let s = T::one() / T::lit(self.len as f64);
        for v in buf.iter_mut() {
            *v = *v * s;
        }
    }
}

fn radix2<T: Scalar>(buf: &mut [Complex<T>], twiddles: &[Complex<T>]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = twiddles[k * step];
                let u = buf[start + k];
                let v = buf[start + k + half] * w;
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        size *= 2;
    }
}

fn direct<T: Scalar>(buf: &mut [Complex<T>], table: &[Complex<T>]) {
    let n = buf.len();
    let input = buf.to_vec();
    for (k, out) in buf.iter_mut().enumerate() {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, x) in input.iter().enumerate() {
            acc = acc + *x * table[(k * j) % n];
        }
        *out = acc;
    }
}

/// A complex `M x N` grid stored as split real/imaginary row-major planes.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid<T> {
    rows: usize,
    cols: usize,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexGrid<T> {
    pub fn new(rows: usize, cols: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        ensure(rows >= 1 && cols >= 1, || format!("grid {rows}x{cols} has an empty axis"))?;
        ensure(re.len() == rows * cols && im.len() == rows * cols, || {
            format!(
                "grid {rows}x{cols} needs {} values per plane, got re={} im={}",
                rows * cols,
                re.len(),
                im.len()
            )
        })?;
        Ok(Self { rows, cols, re, im })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, re: vec![T::zero(); rows * cols], im: vec![T::zero(); rows * cols] }
    }

    pub fn from_real(rows: usize, cols: usize, re: Vec<T>) -> Result<Self> {
        let im = vec![T::zero(); re.len()];
        Self::new(rows, cols, re, im)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, u: usize, v: usize) -> Complex<T> {
        let i = u * self.cols + v;
        Complex::new(self.re[i], self.im[i])
    }

    pub fn set(&mut self, u: usize, v: usize, z: Complex<T>) {
        let i = u * self.cols + v;
        self.re[i] = z.re;
        self.im[i] = z.im;
    }

    fn to_complex(&self) -> Vec<Complex<T>> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex::new(r, i)).collect()
    }

    fn from_complex(rows: usize, cols: usize, z: &[Complex<T>]) -> Self {
        Self {
            rows,
            cols,
            re: z.iter().map(|c| c.re).collect(),
            im: z.iter().map(|c| c.im).collect(),
        }
    }

    /// Sum of `|z|^2` over all entries.
    pub fn energy(&self) -> T {
        self.re.iter().zip(&self.im).map(|(&r, &i)| r * r + i * i).sum()
    }
}

/// Plan for 2-D transforms over `M x N` grids (rows `u`, columns `v`).
#[derive(Clone, Debug)]
pub struct FourierPlan<T> {
    rows: Fft1d<T>,
    cols: Fft1d<T>,
}

impl<T: Scalar> FourierPlan<T> {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self { rows: Fft1d::new(rows)?, cols: Fft1d::new(cols)? })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn row_plan(&self) -> &Fft1d<T> {
        &self.rows
    }

    pub fn col_plan(&self) -> &Fft1d<T> {
        &self.cols
    }

    fn check(&self, grid: &ComplexGrid<T>) -> Result<()> {
        ensure(grid.rows == self.rows.len() && grid.cols == self.cols.len(), || {
            format!(
                "grid is {}x{} but plan is {}x{}",
                grid.rows,
                grid.cols,
                self.rows.len(),
                self.cols.len()
            )
        })
    }

    /// Transforms a row-major `M x N` complex buffer in place, unnormalized.
    pub(crate) fn transform_in_place(&self, buf: &mut [Complex<T>], inverse: bool) {
        let (m, n) = self.shape();
        for row in buf.chunks_exact_mut(n) {
            if inverse {
                self.cols.inverse_unnormalized(row);
            } else {
                self.cols.forward(row);
            }
        }
        let mut column = vec![Complex::new(T::zero(), T::zero()); m];
        for v in 0..n {
            for u in 0..m {
                column[u] = buf[u * n + v];
            }
            if inverse {
                self.rows.inverse_unnormalized(&mut column);
            } else {
                self.rows.forward(&mut column);
            }
            for u in 0..m {
                buf[u * n + v] = column[u];
            }
        }
    }
}

/// `X[u,v] = sum_{m,n} x[m,n] exp(-2 pi i (um/M + vn/N))`.
pub fn fft2<T: Scalar>(x: &ComplexGrid<T>, plan: &FourierPlan<T>) -> Result<ComplexGrid<T>> {
    plan.check(x)?;
    let mut buf = x.to_complex();
    plan.transform_in_place(&mut buf, false);
    Ok(ComplexGrid::from_complex(x.rows, x.cols, &buf))
}

/// Inverse of [`fft2`], including the `1/(MN)` factor.
pub fn ifft2<T: Scalar>(x: &ComplexGrid<T>, plan: &FourierPlan<T>) -> Result<ComplexGrid<T>> {
    plan.check(x)?;
    let mut buf = x.to_complex();
    plan.transform_in_place(&mut buf, true);
    let s = T::one() / T::lit((x.rows * x.cols) as f64);
    for v in buf.iter_mut() {
        *v = *v * s;
    }
    Ok(ComplexGrid::from_complex(x.rows, x.cols, &buf))
}
