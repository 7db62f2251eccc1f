//! Möbius and totient sieves, exact arithmetic in `Q(sqrt 5)`, arbitrary
//! precision reals, and certified evaluation of
//!
//! ```text
//! e = Π_{n>=1} (1 - tau^-n)^((μ(n) - φ(n))/n),   tau = (1 + sqrt 5)/2
//! ```
//!
//! together with the series identities it follows from.
//!
//! * [`arithfn`]: sieved tables of μ and φ, `(1*f)` convolution, divisor sums.
//! * [`exactnum`]: rationals and the quadratic field `Q(sqrt 5)`.
//! * [`bigreal`]: binary floating point with explicit precision contexts.
//! * [`identities`]: truncated evaluations with proven tail bounds.
//! * [`cli`]: the `goldprod` command line.

pub mod arithfn;
pub mod bigreal;
pub mod cli;
pub mod exactnum;
pub mod identities;
