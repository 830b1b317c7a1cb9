//! Nonnegative root of `x^3 + a x^2 + b x + c`.

use crate::error::{Error, Result};

const MAX_NEWTON: usize = 200;

#[inline]
fn eval(a: f64, b: f64, c: f64, x: f64) -> f64 {
    ((x + a) * x + b) * x + c
}

#[inline]
fn deriv(a: f64, b: f64, x: f64) -> f64 {
    (3.0 * x + 2.0 * a) * x + b
}

/// Largest nonnegative real root of `x^3 + a x^2 + b x + c`.
///
/// With `b = 0` and `c < 0` there is exactly one positive root; it is found
/// by Newton's method started from an upper bound, which converges
/// monotonically because the cubic is convex to the right of that root.
/// With `b = 0` and `c = 0` the answer is `max(0, -a)`.
pub fn root_plus(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::NoNonnegativeRoot { a, b, c });
    }
    if b == 0.0 {
        if c == 0.0 {
            return Ok((-a).max(0.0));
        }
        if c < 0.0 {
            return Ok(positive_root_b0(a, c));
        }
    }
    general_root(a, b, c)
}

fn upper_bound_b0(a: f64, c: f64) -> f64 {
    let neg_c = -c;
    let cbrt = neg_c.cbrt();
    // Both candidates are upper bounds of the root.
    if a >= 0.0 {
        cbrt.min((neg_c / a).sqrt())
    } else {
        -a + cbrt.min(neg_c / (a * a))
    }
}

fn positive_root_b0(a: f64, c: f64) -> f64 {
    newton_from_above(a, c, upper_bound_b0(a, c))
}

/// Same root as `root_plus(a, 0, c)` for `c <= 0`, started near `guess`.
///
/// A guess with `f(guess) >= 0` is an upper bound; one below the root is
/// pushed above it by a single Newton step when the cubic is convex and
/// increasing there.
/// Anything else falls back to the analytic upper bound. Non-finite input
/// yields NaN.
pub(crate) fn positive_root_near(a: f64, c: f64, guess: f64) -> f64 {
    if !(a.is_finite() && c.is_finite()) || c > 0.0 {
        return f64::NAN;
    }
    if c == 0.0 {
        return (-a).max(0.0);
    }
    let ub = upper_bound_b0(a, c);
    let mut start = ub;
    if guess > 0.0 && guess < ub {
        let f = eval(a, 0.0, c, guess);
        if f >= 0.0 {
            start = guess;
        } else if 3.0 * guess > -a && deriv(a, 0.0, guess) > 0.0 {
            let next = guess - f / deriv(a, 0.0, guess);
            if next.is_finite() && next > guess && next < ub {
                start = next;
            }
        }
    }
    newton_from_above(a, c, start)
}

fn newton_from_above(a: f64, c: f64, start: f64) -> f64 {
    let mut x = start;
    for _ in 0..MAX_NEWTON {
        let f = eval(a, 0.0, c, x);
        if f <= 0.0 {
            break;
        }
        let step = f / deriv(a, 0.0, x);
        let next = x - step;
        if !(next < x) || next <= 0.0 {
            break;
        }
        x = next;
        if step <= x * 4.0 * f64::EPSILON {
            break;
        }
    }
    x
}

/// Real roots via the depressed cubic, polished by Newton steps.
fn general_root(a: f64, b: f64, c: f64) -> Result<f64> {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = Vec::with_capacity(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        roots.push(u + v - shift);
    } else if p == 0.0 {
        roots.push(-shift);
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let theta = arg.acos();
        for k in 0..3 {
            let t = 2.0 * r * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos();
            roots.push(t - shift);
        }
    }
    let scale = 1.0 + a.abs() + b.abs().sqrt() + c.abs().cbrt();
    let mut best: Option<f64> = None;
    for mut x in roots {
        for _ in 0..8 {
            let d = deriv(a, b, x);
            if d == 0.0 {
                break;
            }
            let step = eval(a, b, c, x) / d;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        if x < 0.0 && x > -1e-12 * scale {
            x = 0.0;
        }
        if x >= 0.0 {
            best = Some(best.map_or(x, |bx: f64| bx.max(x)));
        }
    }
    best.ok_or(Error::NoNonnegativeRoot { a, b, c })
}
