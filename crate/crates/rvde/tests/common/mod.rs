//! Shared helpers for the integration tests. Everything here is written
//! from first principles so the checks stay independent of the library's
//! own numerics.

#![allow(dead_code)]

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
/// Sorts a copy; the caller keeps the original order.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((c - lo).abs()).max((hi - c).abs());
    }
    d
}

/// Asymptotic Kolmogorov p-value for statistic `d` at sample size `n`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let en = (n as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1.0f64).powi(j + 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Standard normal CDF by direct quadrature of the density from 0 to x.
/// Accurate to the quadrature tolerance, which is far below anything the
/// statistical assertions can resolve.
pub fn normal_cdf(x: f64) -> f64 {
    if x <= -12.0 {
        return 0.0;
    }
    if x >= 12.0 {
        return 1.0;
    }
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 + integrate(&pdf, 0.0, x, 1e-12)
}

/// Element `index` (0-based) of the van der Corput sequence in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    index += 1;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Adaptive Gauss-Legendre integration of `f` over [a, b], bisecting any
/// panel whose 10-point and split estimates disagree. Panics if the
/// requested tolerance is unreachable; tests want hard guarantees.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn gl10(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        // 10-point Gauss-Legendre nodes/weights on [-1, 1], published
        // tabulated values kept digit-for-digit.
        #[allow(clippy::excessive_precision)]
        const X: [f64; 5] = [
            0.148874338981631211,
            0.433395394129247191,
            0.679409568299024406,
            0.865063366688984511,
            0.973906528517171720,
        ];
        #[allow(clippy::excessive_precision)]
        const W: [f64; 5] = [
            0.295524224714752870,
            0.269266719309996355,
            0.219086362515982044,
            0.149451349150580593,
            0.066671344308688138,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for i in 0..5 {
            s += W[i] * (f(c - h * X[i]) + f(c + h * X[i]));
        }
        s * h
    }

    struct Panel {
        a: f64,
        b: f64,
        whole: f64,
        depth: u32,
    }
    let mut total = 0.0;
    let mut err = 0.0;
    let mut scale = 0.0f64;
    let mut stack = vec![Panel {
        a,
        b,
        whole: gl10(f, a, b),
        depth: 0,
    }];
    let mut budget = 200_000u32;
    while let Some(p) = stack.pop() {
        budget = budget.checked_sub(1).expect("integration budget exhausted");
        let mid = 0.5 * (p.a + p.b);
        let left = gl10(f, p.a, mid);
        let right = gl10(f, mid, p.b);
        let delta = left + right - p.whole;
        scale = scale.max((left + right).abs());
        if delta.abs() <= 1e-16 * scale.max(1e-300) || p.depth >= 52 {
            total += left + right;
            err += delta.abs();
        } else if delta.abs() < 1e-3 * rel_tol * scale.max(1e-300) {
            total += left + right + delta / 63.0;
            err += delta.abs() / 63.0;
        } else {
            stack.push(Panel {
                a: p.a,
                b: mid,
                whole: left,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: mid,
                b: p.b,
                whole: right,
                depth: p.depth + 1,
            });
        }
    }
    assert!(
        err <= rel_tol * total.abs().max(1e-15),
        "quadrature error {err:.3e} above tolerance for value {total:.6e}"
    );
    total
}

/// Least-squares slope of y against x.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Median of a slice (averages the middle pair on even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let k = v.len();
    assert!(k > 0);
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
