//! Scalar abstraction and forward-mode dual numbers.
//!
//! Model dynamics are written once against [`Scalar`] and evaluated at plain
//! floats or at nested [`Dual`] numbers. Nesting a dual inside a dual gives a
//! fresh infinitesimal per level, which is what the Lie-bracket engine needs to
//! differentiate a field that is itself defined through derivatives.
//!
//! [`Tower`] caps the nesting statically: each base type knows which type sits
//! one level up, and the top level refuses to be lifted further.

use std::fmt::{self, Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Num, NumAssign, One, Zero};

/// Arithmetic needed by the dynamics code.
///
/// Method names deliberately avoid clashing with `num_traits::Float` and
/// `FromPrimitive`, so generic code stays unambiguous.
pub trait Scalar:
    Num + NumAssign + Neg<Output = Self> + Copy + PartialOrd + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    /// Primal value, with every infinitesimal dropped.
    fn re(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
}

macro_rules! impl_scalar_float {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            #[inline]
            fn re(self) -> f64 {
                self as f64
            }
            #[inline]
            fn sin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                <$t>::cos(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                <$t>::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                <$t>::abs(self)
            }
        }
    };
}

impl_scalar_float!(f32);
impl_scalar_float!(f64);

/// First-order dual number `re + eps·ε` with `ε² = 0`.
///
/// Equality and ordering look at the real part only.
#[derive(Clone, Copy, Default)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    #[inline]
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    #[inline]
    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }

    /// Seed a variable with unit tangent.
    #[inline]
    pub fn variable(re: T) -> Self {
        Self { re, eps: T::one() }
    }
}

impl<T: Debug> Debug for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} + {:?}ε", self.re, self.eps)
    }
}

impl<T: Display> Display for Dual<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.re, self.eps)
    }
}

impl<T: PartialEq> PartialEq for Dual<T> {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re
    }
}

impl<T: PartialOrd> PartialOrd for Dual<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = T::one() / rhs.re;
        let re = self.re * inv;
        Self::new(re, (self.eps - re * rhs.eps) * inv)
    }
}

// Only the real part carries a remainder; kept for `Num` completeness.
impl<T: Scalar> Rem for Dual<T> {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        Self::new(self.re % rhs.re, self.eps)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl<T: Scalar> $tr for Dual<T> {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}

assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl<T: Scalar> Zero for Dual<T> {
    fn zero() -> Self {
        Self::constant(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
}

impl<T: Scalar> One for Dual<T> {
    fn one() -> Self {
        Self::constant(T::one())
    }
}

impl<T: Scalar> Num for Dual<T> {
    type FromStrRadixErr = T::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        T::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<T: Scalar> Sum for Dual<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Self::constant(T::from_f64(v))
    }
    #[inline]
    fn re(self) -> f64 {
        self.re.re()
    }
    #[inline]
    fn sin(self) -> Self {
        Self::new(self.re.sin(), self.re.cos() * self.eps)
    }
    #[inline]
    fn cos(self) -> Self {
        Self::new(self.re.cos(), -(self.re.sin() * self.eps))
    }
    #[inline]
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (s + s))
    }
    #[inline]
    fn abs(self) -> Self {
        if self.re.re() < 0.0 {
            -self
        } else {
            self
        }
    }
}

/// A scalar that can host one more infinitesimal.
///
/// `Up` is the type one nesting level higher. The topmost level of each tower
/// sets `Up = Self` and returns `None` from [`Tower::seed`], which is how the
/// bracket engine detects that it ran out of derivative depth.
pub trait Tower: Scalar {
    type Up: Tower;

    /// Remaining nesting levels above this one.
    const HEADROOM: usize;

    /// `value + tangent·ε` one level up, or `None` at the top of the tower.
    fn seed(value: Self, tangent: Self) -> Option<Self::Up>;

    /// Lift a constant one level up.
    fn lift(value: Self) -> Self::Up;

    /// Split a value one level up into `(primal, tangent)`.
    fn split(v: Self::Up) -> (Self, Self);
}

macro_rules! tower_level {
    ($t:ty, $up:ty, $headroom:expr) => {
        impl Tower for $t {
            type Up = $up;
            const HEADROOM: usize = $headroom;
            #[inline]
            fn seed(value: Self, tangent: Self) -> Option<Self::Up> {
                Some(Dual::new(value, tangent))
            }
            #[inline]
            fn lift(value: Self) -> Self::Up {
                Dual::constant(value)
            }
            #[inline]
            fn split(v: Self::Up) -> (Self, Self) {
                (v.re, v.eps)
            }
        }
    };
}

macro_rules! tower_top {
    ($t:ty) => {
        impl Tower for $t {
            type Up = $t;
            const HEADROOM: usize = 0;
            #[inline]
            fn seed(_: Self, _: Self) -> Option<Self::Up> {
                None
            }
            #[inline]
            fn lift(value: Self) -> Self::Up {
                value
            }
            // Unreachable in practice: `seed` never hands out a lifted value.
            #[inline]
            fn split(v: Self::Up) -> (Self, Self) {
                (v, <$t as Zero>::zero())
            }
        }
    };
}

tower_level!(f64, Dual<f64>, 3);
tower_level!(Dual<f64>, Dual<Dual<f64>>, 2);
tower_level!(Dual<Dual<f64>>, Dual<Dual<Dual<f64>>>, 1);
tower_top!(Dual<Dual<Dual<f64>>>);

tower_level!(f32, Dual<f32>, 3);
tower_level!(Dual<f32>, Dual<Dual<f32>>, 2);
tower_level!(Dual<Dual<f32>>, Dual<Dual<Dual<f32>>>, 1);
tower_top!(Dual<Dual<Dual<f32>>>);

/// Base floating-point type the public API is generic over (`f32` or `f64`).
pub trait Real: Tower + Display + fmt::LowerExp + Default {
    /// Machine epsilon, as `f64`.
    const EPSILON: f64;
}

impl Real for f32 {
    const EPSILON: f64 = f32::EPSILON as f64;
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;
}
