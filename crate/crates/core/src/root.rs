//! Brent's bracketing root finder.
//!
//! Combines bisection, secant and inverse quadratic interpolation; the
//! bracket shrinks every iteration so convergence is guaranteed for any
//! continuous function with a sign change on `[a, b]`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("iteration limit reached; last estimate {0}")]
    IterationLimit(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub xtol: f64,
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            xtol: 1e-14,
            rtol: 4.0 * f64::EPSILON,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

pub fn brent<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Root, RootError>
where
    F: FnMut(f64) -> f64,
{
    let mut eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(RootError::NonFinite(x))
        }
    };
    let (mut xpre, mut xcur) = (a, b);
    let mut fpre = eval(xpre)?;
    let mut fcur = eval(xcur)?;
    if fpre == 0.0 {
        return Ok(Root {
            x: xpre,
            fx: 0.0,
            iterations: 0,
        });
    }
    if fcur == 0.0 {
        return Ok(Root {
            x: xcur,
            fx: 0.0,
            iterations: 0,
        });
    }
    if fpre.signum() == fcur.signum() {
        return Err(RootError::NoSignChange {
            a,
            b,
            fa: fpre,
            fb: fcur,
        });
    }

    let (mut xblk, mut fblk) = (0.0, 0.0);
    let (mut spre, mut scur) = (0.0f64, 0.0f64);
    for iter in 1..=tol.max_iter {
        if fpre != 0.0 && fcur != 0.0 && fpre.signum() != fcur.signum() {
            xblk = xpre;
            fblk = fpre;
            spre = xcur - xpre;
            scur = spre;
        }
        if fblk.abs() < fcur.abs() {
            xpre = xcur;
            xcur = xblk;
            xblk = xpre;
            fpre = fcur;
            fcur = fblk;
            fblk = fpre;
        }

        let delta = 0.5 * (tol.xtol + tol.rtol * xcur.abs());
        let sbis = 0.5 * (xblk - xcur);
        if fcur == 0.0 || sbis.abs() < delta {
            return Ok(Root {
                x: xcur,
                fx: fcur,
                iterations: iter,
            });
        }

        if spre.abs() > delta && fcur.abs() < fpre.abs() {
            let stry = if xpre == xblk {
                // secant
                -fcur * (xcur - xpre) / (fcur - fpre)
            } else {
                // inverse quadratic interpolation
                let dpre = (fpre - fcur) / (xpre - xcur);
                let dblk = (fblk - fcur) / (xblk - xcur);
                -fcur * (fblk * dblk - fpre * dpre) / (dblk * dpre * (fblk - fpre))
            };
            if 2.0 * stry.abs() < spre.abs().min(3.0 * sbis.abs() - delta) {
                spre = scur;
                scur = stry;
            } else {
                spre = sbis;
                scur = sbis;
            }
        } else {
            spre = sbis;
            scur = sbis;
        }

        xpre = xcur;
        fpre = fcur;
        if scur.abs() > delta {
            xcur += scur;
        } else {
            xcur += if sbis > 0.0 { delta } else { -delta };
        }
        fcur = eval(xcur)?;
    }
    Err(RootError::IterationLimit(xcur))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_root() {
        let r = brent(|x| -x * x + 2.0 * x + 1.0, 2.0, 3.0, Tolerance::default()).unwrap();
        assert!((r.x - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn reversed_bracket_and_endpoint_roots() {
        let r = brent(|x| x - 0.5, 1.0, 0.0, Tolerance::default()).unwrap();
        assert!((r.x - 0.5).abs() < 1e-14);
        let r = brent(|x| x, 0.0, 1.0, Tolerance::default()).unwrap();
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn reports_missing_sign_change() {
        let err = brent(|x| x * x + 1.0, -1.0, 1.0, Tolerance::default()).unwrap_err();
        assert!(matches!(err, RootError::NoSignChange { .. }));
    }

    #[test]
    fn steep_and_flat_functions() {
        let r = brent(
            |x: f64| (x - 1e-3).powi(3),
            -10.0,
            10.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((r.x - 1e-3).abs() < 1e-4);
        let r = brent(
            |x: f64| (20.0 * (x - 0.3)).tanh(),
            -5.0,
            5.0,
            Tolerance::default(),
        )
        .unwrap();
        assert!((r.x - 0.3).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_bisection_on_cosine() {
        let f = |x: f64| x.cos() - x;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = brent(f, 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((r.x - lo).abs() < 1e-13);
        assert!(r.iterations < 15);
    }

    #[test]
    fn non_finite_values_are_errors() {
        let err = brent(
            |x| if x > 0.9 { f64::NAN } else { x - 0.95 },
            0.0,
            1.0,
            Tolerance::default(),
        )
        .unwrap_err();
        assert!(matches!(err, RootError::NonFinite(_)));
    }
}
