//! Special functions: modified Bessel function of the second kind and Matérn correlation.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

// Taylor coefficients of 1/Γ(z) = Σ c_k z^k, k = 1..26.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Returns (gam1, gam2, 1/Γ(1+x), 1/Γ(1-x)) for |x| <= 1/2, where
/// gam1 = (1/Γ(1-x) - 1/Γ(1+x)) / (2x) and gam2 = (1/Γ(1-x) + 1/Γ(1+x)) / 2.
fn temme_gammas(x: f64) -> (f64, f64, f64, f64) {
    let x2 = x * x;
    // 1/Γ(1+x) = Σ_k c_{k+1} x^k; split into even and odd parts.
    let mut even = 0.0;
    let mut odd = 0.0;
    let mut pw = 1.0;
    for k in 0..RGAMMA.len() / 2 {
        even += RGAMMA[2 * k] * pw;
        odd += RGAMMA[2 * k + 1] * pw;
        pw *= x2;
    }
    let gampl = even + odd * x;
    let gammi = even - odd * x;
    (-odd, even, gampl, gammi)
}

/// Exponentially scaled modified Bessel function of the second kind, `exp(x) K_nu(x)`.
///
/// Uses Temme's series for `x < 2` and Steed's continued fraction otherwise, followed by
/// forward recurrence in the order.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k requires x > 0");
    let nu = nu.abs();
    let nl = (nu + 0.5).floor() as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..=MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= dd / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let scale = x.exp();
        rkmu = sum * scale;
        rk1 = sum1 * xi2 * scale;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..=MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        rkmu = (PI / (2.0 * x)).sqrt() / s;
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    }
    for i in 1..=nl {
        let next = (xmu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
    }
    rkmu
}

/// Modified Bessel function of the second kind `K_nu(x)` for real order and `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// Matérn correlation `2^(1-nu)/Γ(nu) * u^nu * K_nu(u)`, equal to 1 at `u = 0`.
pub fn matern_correlation(nu: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let log_pref = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * u.ln() - u;
    log_pref.exp() * bessel_k_scaled(nu, u)
}

/// Matérn correlations at `u = lambda * k` for `k < len`.
///
/// The correlation decreases in `u`; lags from the first value below `cutoff` on are set
/// to zero (`cutoff = 0` keeps every lag).
pub fn matern_correlations(nu: f64, lambda: f64, len: usize, cutoff: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let log_c = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu);
    for (k, r) in out.iter_mut().enumerate() {
        let v = if k == 0 {
            1.0
        } else {
            let u = lambda * k as f64;
            (log_c + nu * u.ln() - u).exp() * bessel_k_scaled(nu, u)
        };
        if v < cutoff {
            break;
        }
        *r = v;
    }
    out
}
