//! Normal and gamma distribution functions.
//!
//! `erfc` and `ln_gamma` come from `statrs`; the regularized incomplete
//! gamma function and the gamma quantile solver are implemented here.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;
const MAX_ITER: usize = 10_000;

/// Standard normal CDF, `Φ(x) = erfc(-x/√2)/2`.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normal quantile: Acklam's rational approximation polished by one Halley
/// step against [`standard_normal_cdf`].
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("must lie in (0,1), got {u}")));
    }
    Ok(normal_quantile_unchecked(u))
}

fn normal_quantile_unchecked(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const LOW: f64 = 0.024_25;

    let x = if u < LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - u).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = standard_normal_cdf(x) - u;
    let t = e / standard_normal_pdf(x);
    x - t / (1.0 + 0.5 * x * t)
}

/// Regularized lower and upper incomplete gamma functions `(P(a,x), Q(a,x))`.
pub fn regularized_gamma(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // Series: P = e^{-x} x^a / Γ(a) Σ x^k / (a (a+1) ... (a+k)).
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // Modified Lentz evaluation of the continued fraction for Q.
        let tiny = f64::MIN_POSITIVE / EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Gamma(shape, 1) CDF.
pub fn gamma_cdf(x: f64, shape: f64) -> f64 {
    regularized_gamma(shape, x).0
}

fn gamma_log_pdf(x: f64, shape: f64, ln_gamma_shape: f64) -> f64 {
    (shape - 1.0) * x.ln() - x - ln_gamma_shape
}

/// Quantile of the Gamma(shape, 1) law: the `x` with `P(shape, x) = u`.
pub fn gamma_quantile(u: f64, shape: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("must lie in (0,1), got {u}")));
    }
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::invalid(
            "shape_alpha",
            format!("must be positive, got {shape}"),
        ));
    }
    Ok(gamma_quantile_pq(u, 1.0 - u, shape, None))
}

/// Gamma quantile of `Φ(z)`. The upper tail `Φ(-z)` is evaluated directly so
/// large `z` keeps full relative precision.
pub(crate) fn gamma_quantile_of_normal(z: f64, shape: f64) -> f64 {
    let p = standard_normal_cdf(z);
    let q = standard_normal_cdf(-z);
    gamma_quantile_pq(p, q, shape, Some(z))
}

/// Solves `P(shape, x) = p` (equivalently `Q(shape, x) = q`, `p + q = 1`),
/// working on whichever tail is smaller.
fn gamma_quantile_pq(p: f64, q: f64, shape: f64, z: Option<f64>) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if shape == 1.0 {
        return if p < 0.5 { -(-p).ln_1p() } else { -q.ln() };
    }
    let lower = p <= 0.5;
    let lg = ln_gamma(shape);
    // Residual with the sign of P(a,x) - p, computed on the small tail.
    let residual = |x: f64| -> f64 {
        let (pp, qq) = regularized_gamma(shape, x);
        if lower {
            pp - p
        } else {
            q - qq
        }
    };
    let target = if lower { p } else { q };

    let mut x = initial_guess(
        p,
        q,
        shape,
        z.unwrap_or_else(|| normal_quantile_unchecked(p)),
    );
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;

    for _ in 0..100 {
        let f = residual(x);
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = gamma_log_pdf(x, shape, lg).exp();
        let mut next = if pdf > 0.0 && pdf.is_finite() {
            // Halley-corrected Newton step.
            let t = f / pdf;
            let curv = ((shape - 1.0) / x - 1.0) * t;
            x - t / (1.0 - 0.5 * curv.min(1.0))
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x.max(lo) + 1.0
            };
        }
        let step = (next - x).abs();
        x = next;
        if step <= 4.0 * EPS * x || (f.abs() <= 1e-15 * target && step <= 1e-12 * x) {
            return x;
        }
    }
    bisect(residual, lo, hi, x)
}

fn initial_guess(p: f64, q: f64, shape: f64, z: f64) -> f64 {
    // Wilson–Hilferty cube-root normal approximation.
    let c = 1.0 / (9.0 * shape);
    let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
    if shape >= 1.0 && wh > 0.0 {
        return wh;
    }
    // Small-x expansion P(a,x) ≈ x^a / Γ(a+1), and the tail for large p.
    let small = (p.ln() + ln_gamma(shape + 1.0)) / shape;
    let small = small.exp();
    if p < 0.5 || small < 1.0 {
        small.max(f64::MIN_POSITIVE)
    } else {
        (1.0 - q.ln()).max(wh)
    }
}

fn bisect(residual: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, start: f64) -> f64 {
    if !hi.is_finite() {
        hi = start.max(1.0);
        while residual(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bisection on Φ, independent of [`normal_quantile`].
    fn invert_phi(u: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if standard_normal_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn phi_examples() {
        assert_eq!(standard_normal_cdf(0.0), 0.5);
        // Bisection oracle: Φ⁻¹(0.975) = 1.959963984540054...
        let z975 = invert_phi(0.975);
        assert!((z975 - 1.959_964).abs() < 1e-6);
        assert!((standard_normal_cdf(1.959_964) - 0.975).abs() < 1e-6);
        for x in [0.5, 2.0, 5.0] {
            let s = standard_normal_cdf(x) + standard_normal_cdf(-x);
            assert!((s - 1.0).abs() < 1e-14, "{x}: {s}");
        }
    }

    #[test]
    fn phi_matches_erf_definition() {
        // Φ(x) = (1 + erf(x/√2))/2 via statrs' erf; independent of the erfc route.
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            let via_erf = 0.5 * (1.0 + statrs::function::erf::erf(x / std::f64::consts::SQRT_2));
            assert!((standard_normal_cdf(x) - via_erf).abs() <= 1e-12);
        }
    }

    #[test]
    fn normal_quantile_inverts_phi() {
        for u in [1e-12, 1e-6, 0.01, 0.024, 0.3, 0.5, 0.8, 0.99, 1.0 - 1e-9] {
            let z = normal_quantile(u).unwrap();
            // Near u = 1 the input itself is only known to an ulp of 1.
            let z0 = invert_phi(u);
            let tol = 1e-9 + 4.0 * f64::EPSILON / standard_normal_pdf(z0);
            assert!((z - z0).abs() < tol, "u={u}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_against_statrs() {
        for &a in &[0.1, 0.5, 1.0, 2.5, 3.0, 10.0, 50.0] {
            for &x in &[1e-6, 0.01, 0.5, 1.0, 2.0, 3.5, 10.0, 40.0, 80.0] {
                let (p, q) = regularized_gamma(a, x);
                let pr = statrs::function::gamma::gamma_lr(a, x);
                let qr = statrs::function::gamma::gamma_ur(a, x);
                assert!(
                    (p - pr).abs() <= 1e-13 + 1e-10 * pr,
                    "P({a},{x}) {p} vs {pr}"
                );
                assert!(
                    (q - qr).abs() <= 1e-13 + 1e-10 * qr,
                    "Q({a},{x}) {q} vs {qr}"
                );
            }
        }
    }

    #[test]
    fn exponential_closed_forms() {
        // Shape 1 is Exp(1): quantile = -log(1-u).
        let u = 1.0 - (-1.0f64).exp();
        assert!((gamma_quantile(u, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((gamma_quantile(0.5, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn newton_path_matches_exponential() {
        // Shape slightly off 1 exercises the iterative solver near a closed form.
        let a = 1.0 + 1e-12;
        for u in [0.01, 0.3, 0.5, 0.9, 0.999] {
            let x = gamma_quantile(u, a).unwrap();
            assert!((x + (1.0 - u).ln()).abs() < 1e-9, "u={u}: {x}");
        }
    }

    #[test]
    fn round_trip_shape_three() {
        for u in [0.01, 0.5, 0.99] {
            let x = gamma_quantile(u, 3.0).unwrap();
            assert!((gamma_cdf(x, 3.0) - u).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_accuracy_across_shapes() {
        for &a in &[0.05, 0.3, 0.7, 1.5, 3.0, 7.0, 25.0, 200.0] {
            for &u in &[1e-10, 1e-4, 0.02, 0.2, 0.5, 0.8, 0.98, 0.9999] {
                let x = gamma_quantile(u, a).unwrap();
                let (p, q) = regularized_gamma(a, x);
                if u <= 0.5 {
                    assert!((p - u).abs() <= 1e-10 * u, "a={a} u={u}: P={p}");
                } else {
                    let uq = 1.0 - u;
                    assert!((q - uq).abs() <= 1e-10 * u.max(uq), "a={a} u={u}: Q={q}");
                }
            }
        }
    }

    #[test]
    fn extreme_normal_scores() {
        for &a in &[0.5, 3.0] {
            for z in [-8.0, -3.0, 0.0, 3.0, 8.0] {
                let x = gamma_quantile_of_normal(z, a);
                assert!(x.is_finite() && x > 0.0);
                let (p, q) = regularized_gamma(a, x);
                let (pt, qt) = (standard_normal_cdf(z), standard_normal_cdf(-z));
                if pt <= 0.5 {
                    assert!((p - pt).abs() <= 1e-10 * pt);
                } else {
                    assert!((q - qt).abs() <= 1e-10 * qt);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(gamma_quantile(0.0, 1.0).is_err());
        assert!(gamma_quantile(1.0, 1.0).is_err());
        assert!(gamma_quantile(0.5, 0.0).is_err());
        assert!(gamma_quantile(0.5, -1.0).is_err());
    }
}
