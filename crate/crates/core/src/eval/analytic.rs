use serde::{Deserialize, Serialize};

use super::{Backend, EvalError, EvaluationResult, Evaluator};
use crate::codegen::{KernelSpec, OpCensus, RegisterBudget};

/// Cycle cost of each operation class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitCosts {
    pub fma: f64,
    pub load: f64,
    pub broadcast: f64,
    pub store: f64,
    pub scalar_mac: f64,
    /// Per register above the soft limit, per unrolled k iteration.
    pub spill: f64,
    /// Per iteration of any unrolled loop.
    pub loop_overhead: f64,
}

impl Default for UnitCosts {
    fn default() -> Self {
        Self { fma: 1.0, load: 1.0, broadcast: 1.0, store: 1.0, scalar_mac: 8.0, spill: 20.0, loop_overhead: 1.0 }
    }
}

/// Deterministic cycle model over the kernel's operation census.
///
/// Cycles are vector work divided by the issue width, plus scalar residue
/// work, loop overhead and a spill charge for specs whose register need
/// exceeds `spill_soft_limit`. Time assumes a nominal 1 GHz clock, so the
/// reported GFLOP/s equals flops per cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticCostModel {
    pub costs: UnitCosts,
    pub issue_width: f64,
    pub spill_soft_limit: usize,
    pub registers: usize,
}

impl Default for AnalyticCostModel {
    fn default() -> Self {
        Self { costs: UnitCosts::default(), issue_width: 1.0, spill_soft_limit: 32, registers: 32 }
    }
}

impl AnalyticCostModel {
    pub fn validate(&self) -> Result<(), EvalError> {
        let c = &self.costs;
        let all = [c.fma, c.load, c.broadcast, c.store, c.scalar_mac, c.spill, c.loop_overhead, self.issue_width];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(EvalError::InvalidArgument("analytic costs must be positive".into()));
        }
        if self.registers == 0 {
            return Err(EvalError::InvalidArgument("register count must be positive".into()));
        }
        Ok(())
    }

    pub fn cycles(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<f64, EvalError> {
        let required = RegisterBudget { total: self.registers }.check(spec)?;
        let census = OpCensus::of(spec, m, n, k);
        let c = &self.costs;
        let vector = census.fma as f64 * c.fma
            + census.load_b as f64 * c.load
            + census.broadcast as f64 * c.broadcast
            + census.load_c as f64 * c.load
            + census.store_c as f64 * c.store;
        let spilled = required.saturating_sub(self.spill_soft_limit) as f64;
        Ok(vector / self.issue_width
            + census.scalar_mac as f64 * c.scalar_mac
            + (census.outer_iterations + census.inner_iterations) as f64 * c.loop_overhead
            + spilled * c.spill * census.inner_iterations as f64)
    }
}

impl Evaluator for AnalyticCostModel {
    fn backend(&self) -> Backend {
        Backend::Analytic
    }

    fn evaluate(&self, spec: &KernelSpec, m: usize, n: usize, k: usize) -> Result<EvaluationResult, EvalError> {
        if m == 0 || n == 0 || k == 0 {
            return Err(EvalError::InvalidArgument("problem sizes must be positive".into()));
        }
        let cycles = self.cycles(spec, m, n, k)?;
        let flops = 2.0 * (m * n * k) as f64;
        Ok(EvaluationResult {
            performance: flops / cycles,
            correctness_checked: false,
            raw_time: cycles * 1e-9,
            backend: Backend::Analytic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::Strides;

    fn spec(ui: usize, uj: usize, uk: usize) -> KernelSpec {
        KernelSpec::new(ui, uj, uk, Strides::dense(64, 64))
    }

    #[test]
    fn residue_is_slower() {
        let m = AnalyticCostModel::default();
        // 20 rows are a multiple of 4; 22 leave two residue rows (~10%).
        let full = m.evaluate(&spec(4, 16, 1), 20, 16, 16).unwrap().performance;
        let part = m.evaluate(&spec(4, 16, 1), 22, 16, 16).unwrap().performance;
        assert!(part < full);
    }

    #[test]
    fn infeasible_rejected() {
        let m = AnalyticCostModel::default();
        assert!(matches!(m.evaluate(&spec(8, 64, 2), 64, 64, 64), Err(EvalError::Infeasible(_))));
    }

    #[test]
    fn pure_function() {
        let m = AnalyticCostModel::default();
        let a = m.evaluate(&spec(2, 32, 2), 34, 34, 34).unwrap();
        let b = m.evaluate(&spec(2, 32, 2), 34, 34, 34).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.performance.to_bits(), b.performance.to_bits());
    }
}
