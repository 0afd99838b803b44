//! Whole-sheet recalculation in dependency order.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::ast::RefTarget;
use super::eval::{evaluate_formula, CellValues};
use crate::address::{CellAddress, CellRange};
use crate::sheet::{CellContent, Sheet};
use crate::value::{ComputedValue, ErrorCode};

/// Formula-to-formula dependency edges of a sheet.
///
/// Only edges between formula cells matter for ordering; constants are
/// always ready.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct DependencyGraph {
    /// formula cell -> formula cells it reads
    reads: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
    /// formula cell -> formula cells that read it
    readers: BTreeMap<CellAddress, BTreeSet<CellAddress>>,
}

impl DependencyGraph {
    pub fn build(sheet: &Sheet) -> Self {
        let formulas: BTreeSet<CellAddress> = sheet
            .cells()
            .filter(|(_, c)| matches!(c, CellContent::Formula(_)))
            .map(|(a, _)| a)
            .collect();
        let mut graph = DependencyGraph::default();
        for (addr, content) in sheet.cells() {
            let CellContent::Formula(formula) = content else { continue };
            let mut deps = BTreeSet::new();
            formula.expr().visit_refs(&mut |target| match target {
                RefTarget::Cell(a) => {
                    if formulas.contains(&a) {
                        deps.insert(a);
                    }
                }
                RefTarget::Range(r) => deps.extend(formulas_in(&formulas, r)),
            });
            for dep in &deps {
                graph.readers.entry(*dep).or_default().insert(addr);
            }
            graph.reads.insert(addr, deps);
        }
        graph
    }

    /// Formula cells `addr` reads directly.
    pub fn reads(&self, addr: CellAddress) -> impl Iterator<Item = CellAddress> + '_ {
        self.reads.get(&addr).into_iter().flatten().copied()
    }

    /// Formula cells that read `addr` directly.
    pub fn readers(&self, addr: CellAddress) -> impl Iterator<Item = CellAddress> + '_ {
        self.readers.get(&addr).into_iter().flatten().copied()
    }

    /// Formula cells in an evaluation order, plus those that can never be
    /// ordered because they sit on or downstream of a cycle.
    pub fn order(&self) -> (Vec<CellAddress>, BTreeSet<CellAddress>) {
        let mut pending: HashMap<CellAddress, usize> =
            self.reads.iter().map(|(a, deps)| (*a, deps.len())).collect();
        let mut ready: VecDeque<CellAddress> =
            self.reads.iter().filter(|(_, d)| d.is_empty()).map(|(a, _)| *a).collect();
        let mut order = Vec::with_capacity(self.reads.len());
        while let Some(addr) = ready.pop_front() {
            order.push(addr);
            for reader in self.readers(addr) {
                let n = pending.get_mut(&reader).expect("reader is a formula cell");
                *n -= 1;
                if *n == 0 {
                    ready.push_back(reader);
                }
            }
        }
        let ordered: BTreeSet<CellAddress> = order.iter().copied().collect();
        let stuck = self.reads.keys().filter(|a| !ordered.contains(a)).copied().collect();
        (order, stuck)
    }
}

fn formulas_in(formulas: &BTreeSet<CellAddress>, range: CellRange) -> Vec<CellAddress> {
    if range.len() <= formulas.len() as u64 {
        range.iter().filter(|a| formulas.contains(a)).collect()
    } else {
        formulas.iter().filter(|a| range.contains(**a)).copied().collect()
    }
}

/// Values visible while recalculating: constants from the sheet, formulas
/// from the results computed so far.
struct RecalcView<'a> {
    sheet: &'a Sheet,
    computed: &'a HashMap<CellAddress, ComputedValue>,
}

impl RecalcView<'_> {
    fn lookup(&self, addr: CellAddress, content: &CellContent) -> Option<ComputedValue> {
        match content {
            CellContent::Formula(_) => Some(
                self.computed
                    .get(&addr)
                    .cloned()
                    .expect("dependency evaluated before its readers"),
            ),
            other => other.value(),
        }
    }
}

impl CellValues for RecalcView<'_> {
    fn value(&self, addr: CellAddress) -> Option<ComputedValue> {
        self.lookup(addr, self.sheet.get_cell(addr))
    }

    fn for_each_in_range(&self, range: CellRange, f: &mut dyn FnMut(ComputedValue)) {
        let cells = self.sheet.cell_map();
        if range.len() <= cells.len() as u64 {
            for addr in range.iter() {
                if let Some(content) = cells.get(&addr) {
                    f(self.lookup(addr, content).expect("non-empty"));
                }
            }
        } else {
            for (addr, content) in cells.range(range.start()..=range.end()) {
                if range.contains(*addr) {
                    f(self.lookup(*addr, content).expect("non-empty"));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecalcStats {
    /// Formula evaluations performed.
    pub evaluations: usize,
    /// Cells that ended up as `#CIRC!`.
    pub circular: usize,
}

/// Recomputes every formula's cached value.
pub fn recalculate_sheet(sheet: &mut Sheet) -> RecalcStats {
    let graph = DependencyGraph::build(sheet);
    let (order, stuck) = graph.order();
    let mut computed = HashMap::with_capacity(order.len());
    let mut stats = RecalcStats::default();
    for addr in order {
        let CellContent::Formula(formula) = sheet.get_cell(addr) else { unreachable!() };
        let view = RecalcView { sheet, computed: &computed };
        let value = evaluate_formula(formula.expr(), &view);
        stats.evaluations += 1;
        computed.insert(addr, value);
    }
    stats.circular = stuck.len();
    for addr in stuck {
        computed.insert(addr, ComputedValue::Err(ErrorCode::Circ));
    }
    for (addr, content) in sheet.cells_mut().iter_mut() {
        if let CellContent::Formula(formula) = content {
            formula.set_cached(computed.remove(addr).expect("every formula computed"));
        }
    }
    stats
}
