//! Free-space kernels with the outgoing convention `Γ_k(x) = -e^{ik|x|}/(4π|x|)`.

use crate::geometry::Point3;
use num_complex::Complex64;
use std::f64::consts::PI;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const SERIES_SWITCH: f64 = 0.1;

/// `Γ_k(x - y)`.
pub fn gamma(k: f64, x: &Point3, y: &Point3) -> Complex64 {
    let d = (x - y).norm();
    -(I * k * d).exp() / (4.0 * PI * d)
}

/// `∂Γ_k/∂ν_x (x - y)`.
pub fn gamma_normal(k: f64, x: &Point3, y: &Point3, nu_x: &Point3) -> Complex64 {
    let r = x - y;
    let d = r.norm();
    let e = (I * k * d).exp();
    -e * (I * k * d - 1.0) / (4.0 * PI * d * d * d) * r.dot(nu_x)
}

/// Gradient of `Γ_k(x - y)` in `x`.
pub fn gamma_gradient(k: f64, x: &Point3, y: &Point3) -> [Complex64; 3] {
    let r = x - y;
    let d = r.norm();
    let f = -(I * k * d).exp() * (I * k * d - 1.0) / (4.0 * PI * d * d * d);
    [f * r.x, f * r.y, f * r.z]
}

/// `E(d) = (e^{ikd} - 1)/d`, the smooth excess of the Helmholtz kernel over
/// the Laplace one; `E(0) = ik`.
pub fn excess(k: f64, d: f64) -> Complex64 {
    let z = I * k * d;
    if (k * d).abs() < SERIES_SWITCH {
        // ik Σ (ikd)^j/(j+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for j in 1..12 {
            term *= z / (j + 1) as f64;
            sum += term;
        }
        I * k * sum
    } else {
        (z.exp() - 1.0) / d
    }
}

/// `E'(d) = (ikd e^{ikd} - e^{ikd} + 1)/d²`; `E'(0) = -k²/2`.
pub fn excess_deriv(k: f64, d: f64) -> Complex64 {
    let z = I * k * d;
    if (k * d).abs() < SERIES_SWITCH {
        // (ik)² Σ (j+1)(ikd)^j/(j+2)!
        let mut pow = Complex64::new(1.0, 0.0);
        let mut fact = 2.0;
        let mut sum = Complex64::new(0.5, 0.0);
        for j in 1..12 {
            pow *= z;
            fact *= (j + 2) as f64;
            sum += pow * ((j + 1) as f64 / fact);
        }
        (I * k) * (I * k) * sum
    } else {
        let e = z.exp();
        (z * e - e + 1.0) / (d * d)
    }
}

/// Kernel of `S^k - S^0`: `-E(|x-y|)/(4π)`.
pub fn single_excess(k: f64, x: &Point3, y: &Point3) -> Complex64 {
    -excess(k, (x - y).norm()) / (4.0 * PI)
}

/// Kernel of `(K^k)* - (K^0)*`: `-E'(d)/(4π) (x-y)·ν_x/d`, zero at `d = 0`.
pub fn normal_excess(k: f64, x: &Point3, y: &Point3, nu_x: &Point3) -> Complex64 {
    let r = x - y;
    let d = r.norm();
    if d == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    -excess_deriv(k, d) / (4.0 * PI) * (r.dot(nu_x) / d)
}

/// Gradient in `x` of `-E(|x-y|)/(4π)`.
pub fn single_excess_gradient(k: f64, x: &Point3, y: &Point3) -> [Complex64; 3] {
    let r = x - y;
    let d = r.norm();
    if d == 0.0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let f = -excess_deriv(k, d) / (4.0 * PI * d);
    [f * r.x, f * r.y, f * r.z]
}

/// `1/j!` for small `j`.
fn inv_factorial(j: u32) -> f64 {
    (1..=j).fold(1.0, |acc, v| acc / v as f64)
}

/// j-th term of the low-frequency expansion of `Γ_ω`:
/// `-i^j/(4π j!) |x-y|^{j-1}`.
pub fn single_series_kernel(j: u32, x: &Point3, y: &Point3) -> Complex64 {
    let d = (x - y).norm();
    -I.powu(j) * inv_factorial(j) / (4.0 * PI) * d.powi(j as i32 - 1)
}

/// j-th term of the expansion of `∂Γ_ω/∂ν_x`:
/// `-i^j (j-1)/(4π j!) |x-y|^{j-3} (x-y)·ν_x`.
pub fn normal_series_kernel(j: u32, x: &Point3, y: &Point3, nu_x: &Point3) -> Complex64 {
    if j == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let r = x - y;
    let d = r.norm();
    -I.powu(j) * ((j as f64 - 1.0) * inv_factorial(j)) / (4.0 * PI) * d.powi(j as i32 - 3) * r.dot(nu_x)
}
