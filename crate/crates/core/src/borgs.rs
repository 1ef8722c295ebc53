//! Leading-order predictions for random number partitioning and subset sum.
//!
//! All quantities drop the `O(1/n)` and `O(1/(n ρ_n))` corrections; every
//! prediction here is leading order ([`LEADING_ORDER`]). Probability bounds
//! are clipped to `[0, 1]`.

use core::f64::consts::PI;

use num_rational::Ratio;

/// Every value produced by this module omits sub-leading corrections.
pub const LEADING_ORDER: bool = true;

/// Hoeffding concentration exponent used in the `Λ` window.
pub const BETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct BorgsParams {
    pub n: u32,
    pub m: u64,
    /// `E[X²/M²]`, exact.
    pub c_m: Ratio<u128>,
    pub gamma_n: f64,
    pub rho_n: f64,
    pub kappa_n: f64,
    pub lambda_n: f64,
    pub beta: f64,
}

/// `c_M = 1/3 + 1/(2M) + 1/(6M²) = (2M² + 3M + 1) / (6M²)`.
pub fn c_m(m: u64) -> Ratio<u128> {
    let m = u128::from(m);
    Ratio::new(2 * m * m + 3 * m + 1, 6 * m * m)
}

fn ratio_f64(r: &Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// # Panics
/// If `n == 0` or `m == 0`.
pub fn derive_params(n: u32, m: u64) -> BorgsParams {
    assert!(n >= 1 && m >= 1, "derive_params needs n >= 1 and M >= 1");
    let c = c_m(m);
    let nf = f64::from(n);
    let mf = m as f64;
    let gamma_n = 1.0 / (mf * libm::sqrt(2.0 * PI * nf * ratio_f64(&c)));
    let rho_n = libm::exp2(nf + 1.0) * gamma_n;
    let kappa_n = libm::log2(mf) / nf;
    let lambda_n = nf * (kappa_n - 1.0) + libm::log2(nf) / 2.0;
    BorgsParams {
        n,
        m,
        c_m: c,
        gamma_n,
        rho_n,
        kappa_n,
        lambda_n,
        beta: BETA,
    }
}

impl BorgsParams {
    /// `2 n M² c_M` as a float.
    fn spread(&self) -> f64 {
        let m = self.m as f64;
        2.0 * f64::from(self.n) * m * m * ratio_f64(&self.c_m)
    }

    /// `exp(−z² / (2 n M² c_M))`.
    pub fn gaussian(&self, z: i64) -> f64 {
        let z = z as f64;
        libm::exp(-z * z / self.spread())
    }
}

/// Leading-order `E[Z_{n,z}]`: `2ⁿ γₙ e^{−z²/(2nM²c_M)}`, doubled for `z ≠ 0`.
pub fn expected_count(p: &BorgsParams, z: i64) -> f64 {
    let base = libm::exp2(f64::from(p.n)) * p.gamma_n * p.gaussian(z);
    if z == 0 {
        base
    } else {
        2.0 * base
    }
}

/// Leading-order `E[I_{n,z} I_{n,z'}]`; zero when `z` and `z'` differ in parity.
pub fn second_moment(p: &BorgsParams, z: i64, z2: i64) -> f64 {
    if (z - z2).rem_euclid(2) != 0 {
        return 0.0;
    }
    let g = libm::exp(-((z as f64).powi(2) + (z2 as f64).powi(2)) / p.spread());
    let deltas = f64::from(u8::from(z + z2 == 0) + u8::from(z == z2));
    2.0 * p.gamma_n * p.gamma_n * g + p.gamma_n / libm::exp2(f64::from(p.n)) * deltas * g
}

/// `E[Z_{n,z} Z_{n,z'}]` from [`second_moment`] via `Z = 2ⁿ I` (doubled for non-zero targets).
pub fn second_moment_count(p: &BorgsParams, z: i64, z2: i64) -> f64 {
    let lift = |z: i64| if z == 0 { 1.0 } else { 2.0 };
    libm::exp2(2.0 * f64::from(p.n)) * lift(z) * lift(z2) * second_moment(p, z, z2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbBounds {
    pub upper: f64,
    pub lower: f64,
    pub leading_order: bool,
}

fn clip(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Bounds on `P(Z_{n,z} > 0)`.
pub fn npp_prob_bounds(p: &BorgsParams, z: i64) -> ProbBounds {
    let scale = if z == 0 { p.rho_n / 2.0 } else { p.rho_n };
    ProbBounds {
        upper: clip(scale * p.gaussian(z)),
        lower: clip(1.0 / (2.0 * (1.0 + 1.0 / p.rho_n))),
        leading_order: LEADING_ORDER,
    }
}

/// Bounds on `P(Y_{n,t} > 0)` given the instance sum `Λ` (so `z = Λ − 2t`).
pub fn rssp_prob_bounds(p: &BorgsParams, t: i64, lambda: i64) -> ProbBounds {
    let z = lambda - 2 * t;
    let scale = if z == 0 { p.rho_n } else { 2.0 * p.rho_n };
    ProbBounds {
        upper: clip(scale * p.gaussian(z)),
        lower: clip(1.0 / (1.0 + 1.0 / p.rho_n)),
        leading_order: LEADING_ORDER,
    }
}
