//! Fixed inputs shared by the kernel benchmarks in `benches/`.

use mdap_core::counting::TargetPoint;
use mdap_core::heights::LatticeSpec;
use mdap_core::ParamSchedule;

/// `(√2 − 1, √3 − 1)`, badly approximable in each coordinate.
pub fn quadratic_point() -> TargetPoint {
    TargetPoint::new(2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0)
}

/// `a = (ln T)⁻², b = 0.1, c = 0.45`.
pub fn schedule(t: f64) -> ParamSchedule {
    ParamSchedule::new(t.ln().powi(-2), 0.1, 0.45, t)
}

pub fn lattice() -> LatticeSpec {
    LatticeSpec::new(quadratic_point(), 1.0).expect("valid lattice")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_valid() {
        assert!(mdap_core::validate_schedule(&schedule(1e6), mdap_core::Regime::Basic).is_empty());
        assert!(lattice().flowed_norm(mdap_core::FlowTime::ZERO, [0, 0, 1]) > 0.0);
    }
}
