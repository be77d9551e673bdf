use super::FactorGraphFunction;
use crate::error::{Error, Result};
use crate::estimators::{Estimate, EvalKind, MarginalSamples};
use crate::numeric::{for_each_tuple, product_u128, CompensatedSum};
use std::collections::BTreeSet;

/// Greedy ordering rule for [`plan_elimination`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    MinDegree,
    MinFill,
}

/// Order in which blocks are summed out.
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationPlan {
    pub order: Vec<usize>,
    /// Blocks left in the result.
    pub keep: Vec<usize>,
    /// Largest scope handled at once, counting the block being summed out.
    pub width: usize,
    /// Total entries visited across the intermediate contractions.
    pub predicted_cost: u128,
}

/// Dense table indexed by the sample indices of the blocks in `scope`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub scope: Vec<usize>,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Table {
    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Entry at the sample indices given per block (indexed by block).
    pub fn at(&self, assignment: &[usize]) -> f64 {
        let strides = self.strides();
        let idx: usize = self.scope.iter().zip(&strides).map(|(&b, s)| assignment[b] * s).sum();
        self.data[idx]
    }
}

/// Chooses an elimination order for the blocks appearing in `f`'s scopes
/// but not in `keep`.
///
/// `n_per_block` is only used to price the plan. Ties go to the lowest block.
pub fn plan_elimination(
    f: &FactorGraphFunction,
    heuristic: Heuristic,
    keep: &[usize],
    n_per_block: &[usize],
) -> EliminationPlan {
    let k = f.k();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    let mut present = BTreeSet::new();
    let mut width = 0;
    for factor in f.factors() {
        width = width.max(factor.scope().len());
        for &a in factor.scope() {
            present.insert(a);
            for &b in factor.scope() {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    let keep_set: BTreeSet<usize> = keep.iter().copied().collect();
    let mut remaining: BTreeSet<usize> = present.difference(&keep_set).copied().collect();
    let mut order = Vec::with_capacity(remaining.len());
    let mut cost: u128 = 0;
    let size = |b: usize| n_per_block.get(b).copied().unwrap_or(1);
    while !remaining.is_empty() {
        let score = |v: usize| -> usize {
            match heuristic {
                Heuristic::MinDegree => adj[v].len(),
                Heuristic::MinFill => {
                    let nb: Vec<usize> = adj[v].iter().copied().collect();
                    let mut fill = 0;
                    for i in 0..nb.len() {
                        for j in i + 1..nb.len() {
                            if !adj[nb[i]].contains(&nb[j]) {
                                fill += 1;
                            }
                        }
                    }
                    fill
                }
            }
        };
        // BTreeSet iterates in increasing order, so min_by_key keeps the lowest index
        let v = *remaining.iter().min_by_key(|&&v| score(v)).expect("nonempty");
        let nb: Vec<usize> = adj[v].iter().copied().collect();
        width = width.max(nb.len() + 1);
        cost = cost.saturating_add(product_u128(std::iter::once(size(v)).chain(nb.iter().map(|&b| size(b)))));
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        adj[v].clear();
        remaining.remove(&v);
        order.push(v);
    }
    EliminationPlan { order, keep: keep_set.into_iter().collect(), width, predicted_cost: cost }
}

/// Default cap on intermediate table entries.
pub const DEFAULT_TABLE_CAP: u128 = 1 << 26;

/// Product-form estimate of a factor-graph function by variable elimination.
pub fn eval_eliminated(
    marginals: &MarginalSamples,
    f: &FactorGraphFunction,
    plan: &EliminationPlan,
) -> Result<Estimate> {
    eval_eliminated_with(marginals, f, plan, DEFAULT_TABLE_CAP)
}

pub fn eval_eliminated_with(
    marginals: &MarginalSamples,
    f: &FactorGraphFunction,
    plan: &EliminationPlan,
    table_cap: u128,
) -> Result<Estimate> {
    if !plan.keep.is_empty() {
        return Err(Error::InvalidArgument("a scalar estimate needs a plan that eliminates every block".into()));
    }
    let (table, evals) = contract(marginals, f, plan, table_cap)?;
    Ok(Estimate {
        value: table.data[0],
        n_phi_evals: evals,
        n_samples_used: marginals.sizes(),
        kind: EvalKind::Eliminate,
    })
}

/// Averages out the plan's eliminated blocks, returning a table over
/// `plan.keep`.
pub fn eliminate_to_table(
    marginals: &MarginalSamples,
    f: &FactorGraphFunction,
    plan: &EliminationPlan,
    table_cap: u128,
) -> Result<Table> {
    contract(marginals, f, plan, table_cap).map(|(t, _)| t)
}

fn contract(
    marginals: &MarginalSamples,
    f: &FactorGraphFunction,
    plan: &EliminationPlan,
    table_cap: u128,
) -> Result<(Table, u64)> {
    if f.k() != marginals.k() {
        return Err(Error::InvalidArgument(format!("function has {} blocks, samples have {}", f.k(), marginals.k())));
    }
    let sizes = marginals.sizes();
    let covered: BTreeSet<usize> = plan.order.iter().chain(&plan.keep).copied().collect();
    for factor in f.factors() {
        if let Some(b) = factor.scope().iter().find(|b| !covered.contains(b)) {
            return Err(Error::InvalidArgument(format!("plan does not cover block {b}")));
        }
    }
    let check = |scope: &[usize]| -> Result<()> {
        let required = product_u128(scope.iter().map(|&b| sizes[b]));
        if required > table_cap {
            Err(Error::CapExceeded { what: "elimination table", required, cap: table_cap })
        } else {
            Ok(())
        }
    };

    let mut evals: u64 = 0;
    let mut tables: Vec<Table> = Vec::with_capacity(f.factors().len());
    for (i, factor) in f.factors().iter().enumerate() {
        check(factor.scope())?;
        let dims: Vec<usize> = factor.scope().iter().map(|&b| sizes[b]).collect();
        let mut data = Vec::with_capacity(dims.iter().product());
        let mut pts: Vec<&[f64]> = Vec::with_capacity(dims.len());
        let mut bad = None;
        for_each_tuple(&dims, |t| {
            pts.clear();
            pts.extend(factor.scope().iter().zip(t).map(|(&b, &n)| marginals.point(b, n)));
            let v = factor.eval(&pts);
            if !v.is_finite() && bad.is_none() {
                bad = Some(format!("factor {i}, sample indices {t:?}"));
            }
            data.push(v);
        });
        if let Some(location) = bad {
            return Err(Error::NonFinite { location });
        }
        evals += data.len() as u64;
        tables.push(Table { scope: factor.scope().to_vec(), dims, data });
    }

    let mut assignment = vec![0usize; f.k()];
    for &v in &plan.order {
        let (involved, rest): (Vec<Table>, Vec<Table>) = tables.into_iter().partition(|t| t.scope.contains(&v));
        tables = rest;
        if involved.is_empty() {
            continue;
        }
        let scope: Vec<usize> = involved
            .iter()
            .flat_map(|t| t.scope.iter().copied())
            .filter(|&b| b != v)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        check(&scope)?;
        let dims: Vec<usize> = scope.iter().map(|&b| sizes[b]).collect();
        let strides: Vec<Vec<usize>> = involved.iter().map(Table::strides).collect();
        let nv = sizes[v];
        let mut data = Vec::with_capacity(dims.iter().product());
        for_each_tuple(&dims, |t| {
            for (&b, &n) in scope.iter().zip(t) {
                assignment[b] = n;
            }
            let mut acc = CompensatedSum::new();
            for n in 0..nv {
                assignment[v] = n;
                let mut prod = 1.0;
                for (tab, st) in involved.iter().zip(&strides) {
                    let idx: usize = tab.scope.iter().zip(st).map(|(&b, s)| assignment[b] * s).sum();
                    prod *= tab.data[idx];
                }
                acc.add(prod);
            }
            data.push(acc.value() / nv as f64);
        });
        tables.push(Table { scope, dims, data });
    }

    // whatever is left lives on the kept blocks
    let scope = plan.keep.clone();
    check(&scope)?;
    let dims: Vec<usize> = scope.iter().map(|&b| sizes[b]).collect();
    let strides: Vec<Vec<usize>> = tables.iter().map(Table::strides).collect();
    let mut data = Vec::with_capacity(dims.iter().product());
    for_each_tuple(&dims, |t| {
        for (&b, &n) in scope.iter().zip(t) {
            assignment[b] = n;
        }
        let mut prod = 1.0;
        for (tab, st) in tables.iter().zip(&strides) {
            let idx: usize = tab.scope.iter().zip(st).map(|(&b, s)| assignment[b] * s).sum();
            prod *= tab.data[idx];
        }
        data.push(prod);
    });
    Ok((Table { scope, dims, data }, evals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> FactorGraphFunction {
        FactorGraphFunction::new(4)
            .with_factor(&[0, 1], |x| x[0][0] + x[1][0])
            .unwrap()
            .with_factor(&[1, 2], |x| x[0][0] * x[1][0] + 1.0)
            .unwrap()
            .with_factor(&[2, 3], |x| (x[0][0] - x[1][0]).exp())
            .unwrap()
    }

    #[test]
    fn chain_has_width_two() {
        let plan = plan_elimination(&chain(), Heuristic::MinDegree, &[], &[4; 4]);
        assert_eq!(plan.width, 2);
        assert_eq!(plan.order, vec![0, 1, 2, 3]);
        let plan = plan_elimination(&chain(), Heuristic::MinFill, &[], &[4; 4]);
        assert_eq!(plan.width, 2);
    }

    #[test]
    fn fully_factorized_costs_sum_of_sizes() {
        let mut f = FactorGraphFunction::new(3);
        for k in 0..3 {
            f = f.with_factor(&[k], |x| x[0][0]).unwrap();
        }
        let plan = plan_elimination(&f, Heuristic::MinDegree, &[], &[2, 3, 5]);
        assert_eq!(plan.width, 1);
        assert_eq!(plan.predicted_cost, 10);
    }

    #[test]
    fn full_scope_factor_forces_full_width() {
        let f = FactorGraphFunction::new(3).with_factor(&[0, 1, 2], |x| x[0][0] * x[1][0] * x[2][0]).unwrap();
        let plan = plan_elimination(&f, Heuristic::MinFill, &[], &[2; 3]);
        assert_eq!(plan.width, 3);
    }

    #[test]
    fn kept_blocks_are_not_eliminated() {
        let plan = plan_elimination(&chain(), Heuristic::MinDegree, &[1], &[3; 4]);
        assert!(!plan.order.contains(&1));
        assert_eq!(plan.keep, vec![1]);
        let m = MarginalSamples::from_scalars(vec![
            vec![0.1, 0.2, 0.3],
            vec![1.0, 2.0, 3.0],
            vec![0.5, -0.5, 0.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let table = eliminate_to_table(&m, &chain(), &plan, DEFAULT_TABLE_CAP).unwrap();
        assert_eq!(table.dims, vec![3]);
        let full = plan_elimination(&chain(), Heuristic::MinDegree, &[], &[3; 4]);
        let total = eval_eliminated(&m, &chain(), &full).unwrap().value;
        let avg = table.data.iter().sum::<f64>() / 3.0;
        assert!((avg - total).abs() < 1e-12 * total.abs());
    }

    #[test]
    fn table_cap_enforced() {
        let f = FactorGraphFunction::new(2).with_factor(&[0, 1], |x| x[0][0] * x[1][0]).unwrap();
        let m = MarginalSamples::from_scalars(vec![vec![1.0; 10], vec![1.0; 10]]).unwrap();
        let plan = plan_elimination(&f, Heuristic::MinDegree, &[], &[10, 10]);
        assert!(matches!(eval_eliminated_with(&m, &f, &plan, 50), Err(Error::CapExceeded { .. })));
    }
}
