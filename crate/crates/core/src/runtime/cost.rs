use std::collections::BTreeMap;

use crate::lang::NodeKind;

/// Virtual cost of executing each node kind once.
///
/// `For` loops are charged as if desugared into an assignment and a `while`
/// loop, so a `for` header check costs the same as `while (i < limit)` and
/// each step the same as `i = i + step`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostTable {
    costs: BTreeMap<NodeKind, u64>,
    /// Fixed cost of entering a dispatch unit, identical for every fork.
    pub dispatch: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        let mut costs: BTreeMap<NodeKind, u64> = NodeKind::ALL.iter().map(|k| (*k, 1)).collect();
        costs.insert(NodeKind::ArrayLoad, 2);
        costs.insert(NodeKind::ArrayStore, 2);
        // Callee work is charged to the callee; pause(n) charges n safepoint
        // units on top of this.
        costs.insert(NodeKind::Call, 0);
        costs.insert(NodeKind::Pause, 0);
        CostTable { costs, dispatch: 2 }
    }
}

impl CostTable {
    pub fn cost(&self, kind: NodeKind) -> u64 {
        self.costs.get(&kind).copied().unwrap_or(0)
    }

    pub fn set(&mut self, kind: NodeKind, cost: u64) {
        self.costs.insert(kind, cost);
    }

    pub(crate) fn for_init(&self) -> u64 {
        self.cost(NodeKind::Assign)
    }

    pub(crate) fn for_check(&self) -> u64 {
        self.cost(NodeKind::For) + self.cost(NodeKind::LocalRead) + self.cost(NodeKind::BinOp)
    }

    pub(crate) fn for_step(&self) -> u64 {
        self.cost(NodeKind::Assign) + self.cost(NodeKind::LocalRead) + self.cost(NodeKind::BinOp)
    }
}
