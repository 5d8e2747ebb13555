//! Dense NCHW tensors, the autodiff tape and the optimizer.

pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tape;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

pub use gradcheck::{grad_check, grad_check_with_step, GradCheckReport};
pub use optim::{AdamConfig, AdamState};
pub use params::{ParamId, ParamStore};
pub use tape::{Tape, Var};

use crate::error::TensorError;

/// Scalar type the engine runs on. Training uses `f32`; `f64` backs the
/// finite-difference gradient checks.
pub trait Real: Float + Default + Debug + Display + Sum + Send + Sync + 'static {
    /// `c = alpha * a·b + beta * c` on strided matrices. See [`kernels::gemm`].
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f64(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("finite f64 converts")
    }

    fn to_f64(self) -> f64 {
        <Self as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                // Bounds are checked by the safe wrapper in `kernels::gemm`.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    )
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// `(n, c, h, w)`.
pub type Shape = [usize; 4];

pub fn numel(shape: &Shape) -> usize {
    shape.iter().product()
}

/// Dense 4-D tensor in row-major NCHW order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != numel(&shape) {
            return Err(TensorError::DataLength {
                shape,
                len: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); numel(&shape)],
        }
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; numel(&shape)],
        }
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: [1, 1, 1, 1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize) -> T) -> Self {
        Tensor {
            shape,
            data: (0..numel(&shape)).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// The single value of a `1×1×1×1` tensor.
    pub fn item(&self) -> Result<T, TensorError> {
        if self.data.len() != 1 {
            return Err(TensorError::NotScalar { shape: self.shape });
        }
        Ok(self.data[0])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of channels `range` (all samples).
    pub fn slice_channels(&self, range: std::ops::Range<usize>) -> Result<Self, TensorError> {
        let [n, c, h, w] = self.shape;
        if range.start > range.end || range.end > c {
            return Err(TensorError::Shape {
                op: "slice_channels",
                detail: format!("channel range {range:?} out of bounds for {c} channels"),
            });
        }
        let plane = h * w;
        let oc = range.end - range.start;
        let mut data = Vec::with_capacity(n * oc * plane);
        for s in 0..n {
            let start = (s * c + range.start) * plane;
            data.extend_from_slice(&self.data[start..start + oc * plane]);
        }
        Ok(Tensor {
            shape: [n, oc, h, w],
            data,
        })
    }

    /// Samples `range` along the batch axis.
    pub fn slice_batch(&self, range: std::ops::Range<usize>) -> Result<Self, TensorError> {
        let [n, c, h, w] = self.shape;
        if range.start > range.end || range.end > n {
            return Err(TensorError::Shape {
                op: "slice_batch",
                detail: format!("batch range {range:?} out of bounds for {n} samples"),
            });
        }
        let per = c * h * w;
        Ok(Tensor {
            shape: [range.end - range.start, c, h, w],
            data: self.data[range.start * per..range.end * per].to_vec(),
        })
    }

    /// Stack same-shaped `1×c×h×w` (or `n×c×h×w`) tensors along the batch axis.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Self, TensorError> {
        let first = parts.first().ok_or(TensorError::Shape {
            op: "stack",
            detail: "no tensors to stack".into(),
        })?;
        let [_, c, h, w] = first.shape;
        let mut n = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != [c, h, w] {
                return Err(TensorError::Shape {
                    op: "stack",
                    detail: format!("{:?} does not match {:?}", p.shape, first.shape),
                });
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor {
            shape: [n, c, h, w],
            data,
        })
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from_f64(Real::to_f64(*v))).collect(),
        }
    }
}
