//! D3Q19 velocity set and the equilibrium distributions built on it.

use crate::scalar::Real;

pub const Q: usize = 19;

/// Discrete velocities; index 0 is the rest population.
pub const C: [[i32; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [1, 0, 1],
    [-1, 0, -1],
    [1, 0, -1],
    [-1, 0, 1],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
];

pub const W: [f64; Q] = [
    1.0 / 3.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 18.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];

/// Index of the reversed velocity.
pub const OPP: [usize; Q] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

/// Squared lattice sound speed.
pub const CS2: f64 = 1.0 / 3.0;

#[inline(always)]
pub fn weight<T: Real>(i: usize) -> T {
    T::lit(W[i])
}

#[inline(always)]
pub fn cdot<T: Real>(i: usize, u: [T; 3]) -> T {
    let c = C[i];
    T::lit(c[0] as f64) * u[0] + T::lit(c[1] as f64) * u[1] + T::lit(c[2] as f64) * u[2]
}

/// Second-order Maxwell equilibrium for the hydrodynamic populations.
pub fn equilibrium_f<T: Real>(rho: T, u: [T; 3]) -> [T; Q] {
    let mut out = [T::zero(); Q];
    equilibrium_f_into(rho, u, &mut out);
    out
}

#[inline(always)]
pub fn equilibrium_f_into<T: Real>(rho: T, u: [T; 3], out: &mut [T]) {
    let three = T::lit(3.0);
    let usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let base = T::one() - T::lit(1.5) * usq;
    for i in 0..Q {
        let cu = cdot(i, u);
        out[i] = weight::<T>(i) * rho * (base + three * cu + T::lit(4.5) * cu * cu);
    }
}

#[inline(always)]
pub fn equilibrium_f_single<T: Real>(i: usize, rho: T, u: [T; 3]) -> T {
    let usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let cu = cdot(i, u);
    weight::<T>(i) * rho * (T::one() + T::lit(3.0) * cu + T::lit(4.5) * cu * cu - T::lit(1.5) * usq)
}

/// Linear advection-diffusion equilibrium for the energy populations.
pub fn equilibrium_h<T: Real>(energy: T, u: [T; 3]) -> [T; Q] {
    let mut out = [T::zero(); Q];
    for (i, o) in out.iter_mut().enumerate() {
        *o = weight::<T>(i) * energy * (T::one() + T::lit(3.0) * cdot(i, u));
    }
    out
}

/// Energy equilibrium whose isotropic part carries only the sensible enthalpy.
///
/// Zeroth moment is `energy`, first moment `energy * u`, and the second moment
/// is `cs² · sensible`, so diffusion acts on the sensible enthalpy and the
/// resulting flux is Fourier's `λ ∇T` even across the mushy interval. With no
/// latent contribution (`sensible == energy`) this is exactly [`equilibrium_h`].
#[inline(always)]
pub fn equilibrium_h_phase_into<T: Real>(energy: T, sensible: T, u: [T; 3], out: &mut [T]) {
    let three = T::lit(3.0);
    let w0 = weight::<T>(0);
    out[0] = energy - (T::one() - w0) * sensible;
    for i in 1..Q {
        out[i] = weight::<T>(i) * (sensible + three * energy * cdot(i, u));
    }
}

/// Zeroth and first moments of a population set: `(Σ f, Σ c f)`.
pub fn moments<T: Real>(f: &[T]) -> (T, [T; 3]) {
    let mut rho = T::zero();
    let mut j = [T::zero(); 3];
    for i in 0..Q {
        rho = rho + f[i];
        for d in 0..3 {
            match C[i][d] {
                1 => j[d] = j[d] + f[i],
                -1 => j[d] = j[d] - f[i],
                _ => {}
            }
        }
    }
    (rho, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_set_is_consistent() {
        let wsum: f64 = W.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-15);
        for i in 0..Q {
            for d in 0..3 {
                assert_eq!(C[i][d], -C[OPP[i]][d]);
            }
        }
        // second-order isotropy: Σ w c_a c_b = cs² δ_ab
        for a in 0..3 {
            for b in 0..3 {
                let s: f64 = (0..Q).map(|i| W[i] * (C[i][a] * C[i][b]) as f64).sum();
                let want = if a == b { CS2 } else { 0.0 };
                assert!((s - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rest_equilibrium_is_weights() {
        let f = equilibrium_f(1.0f64, [0.0; 3]);
        for i in 0..Q {
            assert_eq!(f[i], W[i]);
        }
        let h = equilibrium_h(2.5f64, [0.0; 3]);
        for i in 0..Q {
            assert!((h[i] - 2.5 * W[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_moments_match_direct_sum() {
        let u = [0.05, 0.0, 0.0];
        let f = equilibrium_f(1.0f64, u);
        // direct 19-term summation, independent of `moments`
        let mut rho = 0.0;
        let mut jx = 0.0;
        for i in 0..Q {
            rho += f[i];
            jx += C[i][0] as f64 * f[i];
        }
        assert!((rho - 1.0).abs() < 1e-14);
        assert!((jx - 0.05).abs() < 1e-14);
        let h = equilibrium_h(3.0f64, [0.01, -0.02, 0.03]);
        let mut e = 0.0;
        let mut q = [0.0; 3];
        for i in 0..Q {
            e += h[i];
            for d in 0..3 {
                q[d] += C[i][d] as f64 * h[i];
            }
        }
        assert!((e - 3.0).abs() < 1e-14);
        assert!((q[0] - 0.03).abs() < 1e-14);
        assert!((q[1] + 0.06).abs() < 1e-14);
        assert!((q[2] - 0.09).abs() < 1e-14);
    }

    #[test]
    fn phase_equilibrium_reduces_without_latent_heat() {
        let u = [0.02, 0.01, -0.03];
        let mut a = [0.0f64; Q];
        equilibrium_h_phase_into(4.0, 4.0, u, &mut a);
        let b = equilibrium_h(4.0, u);
        for i in 0..Q {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
        // with latent heat the zeroth and first moments still follow the total energy
        equilibrium_h_phase_into(5.0, 4.0, u, &mut a);
        let (e, j) = moments(&a);
        assert!((e - 5.0).abs() < 1e-14);
        for d in 0..3 {
            assert!((j[d] - 5.0 * u[d]).abs() < 1e-14);
        }
    }

    #[test]
    fn f32_instantiation() {
        let f = equilibrium_f(1.0f32, [0.01, 0.0, 0.0]);
        let (rho, j) = moments(&f);
        assert!((rho - 1.0).abs() < 1e-6);
        assert!((j[0] - 0.01).abs() < 1e-6);
    }
}
