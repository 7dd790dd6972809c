//! Log barrier on contact distance and the edge–edge parallel mollifier.

/// `b(d) = −κ (d − d̂)² ln(d/d̂)` for `0 < d < d̂`, zero beyond.
pub fn barrier(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let t = d - dhat;
    -kappa * t * t * (d / dhat).ln()
}

pub fn barrier_first(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let t = d - dhat;
    -kappa * (2.0 * t * (d / dhat).ln() + t * t / d)
}

pub fn barrier_second(d: f64, dhat: f64, kappa: f64) -> f64 {
    if d >= dhat {
        return 0.0;
    }
    let t = d - dhat;
    -kappa * (2.0 * (d / dhat).ln() + 4.0 * t / d - t * t / (d * d))
}

/// Barrier stiffness whose curvature at `d̂/2` equals the penalty stiffness
/// `E · L` of a contact patch of size `L` (N/m).
pub fn stiffness_from_modulus(modulus: f64, length: f64) -> f64 {
    modulus * length / barrier_second(0.5, 1.0, 1.0)
}

/// Mollifier `m(c)` on the squared cross-product norm `c` of two edges.
pub fn mollifier(c: f64, eps: f64) -> (f64, f64, f64) {
    if c >= eps {
        return (1.0, 0.0, 0.0);
    }
    let r = c / eps;
    (r * (2.0 - r), 2.0 * (1.0 - r) / eps, -2.0 / (eps * eps))
}
