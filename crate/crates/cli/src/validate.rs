//! Self-checks run by `hdqkd validate`.

use std::fmt::Write as _;

use hdqkd_core::entropy::{
    assemble_sdp, direct_entropy_oracle, gauss_radau, solve_entropy_bound, SolverOptions, CONSTRAINT_TOL,
};
use hdqkd_core::model::{isotropic_time_state, Protocol, ProtocolConfig};
use hdqkd_core::noise::{monte_carlo_estimate, p_good, p_tt11, per_frame_params};
use hdqkd_core::povm::{build_m0, build_m1_p1, build_m1_p2, build_m2_p1, constraints_from_state, LabeledPovm};
use hdqkd_core::Result;

use crate::config::ScenarioConfig;

/// One checked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// Measured deviation (or statistic).
    pub value: f64,
    /// Largest admissible value.
    pub limit: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.limit
    }
}

fn povm_checks(out: &mut Vec<Check>) -> Result<()> {
    type Builder = fn(usize) -> Result<LabeledPovm>;
    let builders: [(&str, Builder); 4] =
        [("M0", build_m0), ("M1^P1", build_m1_p1), ("M2^P1", build_m2_p1), ("M1^P2", build_m1_p2)];
    for d in [2, 4, 6, 8] {
        for (name, build) in builders {
            out.push(Check {
                suite: "povm",
                name: format!("{name} completeness d={d}"),
                value: build(d)?.completeness_error(),
                limit: 1e-10,
            });
        }
    }
    Ok(())
}

fn quadrature_checks(out: &mut Vec<Check>) -> Result<()> {
    let q2 = gauss_radau(2)?;
    let dev2 = [q2.nodes[0] - 1.0 / 3.0, q2.weights[0] - 0.75, q2.nodes[1] - 1.0, q2.weights[1] - 0.25]
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    out.push(Check { suite: "quadrature", name: "m=2 rule {1/3: 3/4, 1: 1/4}".into(), value: dev2, limit: 1e-12 });
    let q = gauss_radau(10)?;
    out.push(Check {
        suite: "quadrature",
        name: "m=10 last weight 1/100".into(),
        value: (q.weights[9] - 0.01).abs(),
        limit: 1e-12,
    });
    out.push(Check {
        suite: "quadrature",
        name: "m=10 weights sum to 1".into(),
        value: (q.weights.iter().sum::<f64>() - 1.0).abs(),
        limit: 1e-12,
    });
    let moments = (0..=18)
        .map(|k| (q.integrate(|t| t.powi(k)) - 1.0 / (k as f64 + 1.0)).abs())
        .fold(0.0, f64::max);
    out.push(Check { suite: "quadrature", name: "m=10 moments t^0..t^18".into(), value: moments, limit: 1e-10 });
    Ok(())
}

fn noise_checks(cfg: &ScenarioConfig, out: &mut Vec<Check>) -> Result<()> {
    for protocol in [Protocol::P1, Protocol::P2] {
        for solar in [0.0, 1e4, 1e6] {
            let pc = ProtocolConfig { protocol, d: 4, solar_rate_hz: solar, ..cfg.protocol_config() };
            let p = per_frame_params(&pc);
            let mc = monte_carlo_estimate(protocol, &p, cfg.mc_frames, cfg.seed)?;
            let z_tt = (mc.p_tt11 - p_tt11(protocol, &p)?).abs() / mc.p_tt11_stderr.max(1e-300);
            let z_good = (mc.p_good - p_good(protocol, &p)?).abs() / mc.p_good_stderr.max(1e-300);
            let tag = protocol.tag();
            out.push(Check {
                suite: "noise",
                name: format!("{tag} P_TT(1,1) vs Monte Carlo, solar {solar:e} Hz (z-score)"),
                value: z_tt,
                limit: 4.0,
            });
            out.push(Check {
                suite: "noise",
                name: format!("{tag} P_Good vs Monte Carlo, solar {solar:e} Hz (z-score)"),
                value: z_good,
                limit: 4.0,
            });
        }
    }
    Ok(())
}

fn entropy_checks(cfg: &ScenarioConfig, out: &mut Vec<Check>) -> Result<()> {
    let opts = SolverOptions { backend: cfg.backend, gap_tolerance: cfg.gap_tolerance, ..SolverOptions::default() };
    for v in [0.9, 1.0] {
        let rho = isotropic_time_state(v, 2)?;
        let constraints = constraints_from_state(Protocol::P1, &rho)?;
        let problem = assemble_sdp(&constraints, gauss_radau(cfg.quadrature_m)?)?;
        let residual = problem
            .constraints
            .iter()
            .map(|(op, f)| rho.expectation(op).map(|x| (x - f).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(Check {
            suite: "entropy",
            name: format!("target state feasible, d=2 v={v}"),
            value: residual,
            limit: CONSTRAINT_TOL,
        });
        let sol = solve_entropy_bound(&problem, &opts)?;
        let oracle = direct_entropy_oracle(&rho)?;
        // A missing bound fails the check.
        let excess = if sol.status.has_bound() { sol.bound - oracle } else { f64::INFINITY };
        out.push(Check {
            suite: "entropy",
            name: format!("bound below exact S(A|E), d=2 v={v} m={}", cfg.quadrature_m),
            value: excess,
            limit: 1e-6,
        });
    }
    Ok(())
}

/// Runs every suite.
pub fn run_all(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    povm_checks(&mut out)?;
    quadrature_checks(&mut out)?;
    noise_checks(cfg, &mut out)?;
    entropy_checks(cfg, &mut out)?;
    Ok(out)
}

/// Pass/fail table, one line per check.
pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{verdict}  {:<10} {:<width$}  {:.3e} <= {:.1e}", c.suite, c.name, c.value, c.limit);
    }
    s
}
