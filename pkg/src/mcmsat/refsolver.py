"""Self-contained complete solver for pseudo-Boolean decision instances.

Counter-based propagation over normalized >=-constraints, chronological
backtracking, and a deterministic lowest-index decision order.  Two
sound reductions keep the search from thrashing on don't-care blocks
(disabled candidate selectors, unused shift stages):

* a variable appearing in no unsatisfied constraint is fixed outright
  (single-variable autarky);
* when the lowest eligible variable sits in a small connected component
  of unsatisfied constraints whose unassigned variables are confined to
  that component, the component is completed in place and its decisions
  are frozen: by independence, no alternative completion of it can ever
  help (autarky reasoning), so backtracking treats them as forced.

Both reductions preserve completeness and determinism; neither stores
learned constraints.  A compiled core with the identical algorithm is
used when a C compiler is available (see native.py); the Python paths
below are the reference and the fallback.  Intended for desk-scale
instances; use an external solver beyond ~10-bit constants.
"""

from __future__ import annotations

import time

from .pb import EQ, SAT, UNKNOWN, UNSAT, Model, PbFormula

FORCED = 0  # propagated, frozen autarky, or exhausted decision
OPEN = 1  # decision whose second phase is still untried

ISLAND_LIMIT = 96  # component size above which normal branching takes over
ISLAND_ROW_GATE = 64  # skip the component flood for busier variables

UNASSIGNED = -1


class RefSolver:
    def __init__(self, formula: PbFormula, phases=None, use_native: bool = True):
        self.nvars = formula.var_count
        # Preferred first value per variable; affects search order only.
        self.phases = bytearray(self.nvars + 1)
        if phases:
            for var, phase in phases.items():
                self.phases[var] = phase
        self.use_native = use_native
        self.root_conflict = False
        rows: list[tuple[list[int], list[int], int]] = []

        def add_row(terms, bound):
            # Normalize to positive coefficients over literals (+v / -v).
            lits, coefs = [], []
            for coef, var in terms:
                if coef > 0:
                    lits.append(var)
                    coefs.append(coef)
                else:
                    lits.append(-var)
                    coefs.append(-coef)
                    bound += -coef
            if bound <= 0:
                return
            if sum(coefs) < bound:
                self.root_conflict = True
                return
            order = sorted(range(len(coefs)), key=lambda i: (-coefs[i], lits[i]))
            rows.append(
                ([coefs[i] for i in order], [lits[i] for i in order], bound)
            )

        for c in formula.constraints:
            add_row(c.terms, c.bound)
            if c.relation == EQ:
                add_row([(-coef, var) for coef, var in c.terms], -c.bound)

        self.coefs = [r[0] for r in rows]
        self.lits = [r[1] for r in rows]
        self.bounds = [r[2] for r in rows]
        self.nrows = len(rows)
        # Occurrences split by polarity: assigning v=1 satisfies pos rows
        # and shrinks neg rows; v=0 the other way around.
        nv = self.nvars + 1
        self.pos_rows = [[] for _ in range(nv)]
        self.pos_coefs = [[] for _ in range(nv)]
        self.neg_rows = [[] for _ in range(nv)]
        self.neg_coefs = [[] for _ in range(nv)]
        for ridx in range(self.nrows):
            for a, lit in zip(self.coefs[ridx], self.lits[ridx]):
                if lit > 0:
                    self.pos_rows[lit].append(ridx)
                    self.pos_coefs[lit].append(a)
                else:
                    self.neg_rows[-lit].append(ridx)
                    self.neg_coefs[-lit].append(a)

        self.maxposs = [sum(cs) for cs in self.coefs]
        self.satsum = [0] * self.nrows
        self.queued = bytearray(self.nrows)
        self.assigned = [UNASSIGNED] * nv
        self.trail = []  # vars in assignment order
        self.kinds = []
        self._head = 1
        self._island = None
        self._island_height = 0
        self.decisions = 0
        self.propagations = 0
        self.conflicts = 0
        self.islands = 0

    # -- assignment machinery ------------------------------------------

    def _assign(self, var: int, value: int, kind: int, queue: list) -> int:
        """Set var; returns a conflicting row index or -1."""
        self.assigned[var] = value
        self.trail.append(var)
        self.kinds.append(kind)
        if value == 1:
            gain_rows = self.pos_rows[var]
            gain_coefs = self.pos_coefs[var]
            loss_rows = self.neg_rows[var]
            loss_coefs = self.neg_coefs[var]
        else:
            gain_rows = self.neg_rows[var]
            gain_coefs = self.neg_coefs[var]
            loss_rows = self.pos_rows[var]
            loss_coefs = self.pos_coefs[var]
        satsum = self.satsum
        for r, a in zip(gain_rows, gain_coefs):
            satsum[r] += a
        conflict = -1
        maxposs = self.maxposs
        bounds = self.bounds
        queued = self.queued
        for r, a in zip(loss_rows, loss_coefs):
            mp = maxposs[r] = maxposs[r] - a
            if mp < bounds[r]:
                conflict = r
            elif satsum[r] < bounds[r] and not queued[r]:
                queued[r] = 1
                queue.append(r)
        return conflict

    def _unassign_to(self, height: int) -> int:
        """Pop the trail down to `height`; returns the lowest popped variable."""
        lowest = self.nvars + 1
        maxposs = self.maxposs
        satsum = self.satsum
        assigned = self.assigned
        trail = self.trail
        kinds = self.kinds
        while len(trail) > height:
            var = trail.pop()
            kinds.pop()
            value = assigned[var]
            assigned[var] = UNASSIGNED
            if var < lowest:
                lowest = var
            if value == 1:
                gain_rows = self.pos_rows[var]
                gain_coefs = self.pos_coefs[var]
                loss_rows = self.neg_rows[var]
                loss_coefs = self.neg_coefs[var]
            else:
                gain_rows = self.neg_rows[var]
                gain_coefs = self.neg_coefs[var]
                loss_rows = self.pos_rows[var]
                loss_coefs = self.pos_coefs[var]
            for r, a in zip(gain_rows, gain_coefs):
                satsum[r] -= a
            for r, a in zip(loss_rows, loss_coefs):
                maxposs[r] += a
        return lowest

    def _propagate(self, queue: list) -> int:
        """Exhaust forced assignments; returns a conflicting row or -1."""
        assigned = self.assigned
        bounds = self.bounds
        maxposs = self.maxposs
        satsum = self.satsum
        coefs = self.coefs
        lits = self.lits
        queued = self.queued

        def flush(ridx):
            for r in queue:
                queued[r] = 0
            queue.clear()
            return ridx

        while queue:
            ridx = queue.pop()
            queued[ridx] = 0
            bound = bounds[ridx]
            if satsum[ridx] >= bound:
                continue
            slack = maxposs[ridx] - bound
            if slack < 0:
                return flush(ridx)
            row_coefs = coefs[ridx]
            row_lits = lits[ridx]
            for i in range(len(row_coefs)):
                a = row_coefs[i]
                if a <= slack:
                    break
                lit = row_lits[i]
                var = lit if lit > 0 else -lit
                if assigned[var] == UNASSIGNED:
                    self.propagations += 1
                    conflict = self._assign(var, 1 if lit > 0 else 0, FORCED, queue)
                    if conflict >= 0:
                        return flush(conflict)
                    if satsum[ridx] >= bound:
                        break
                    slack = maxposs[ridx] - bound
                    if slack < 0:
                        return flush(ridx)
        return -1

    def _backtrack(self) -> bool:
        """Flip the deepest open decision; False when the tree is exhausted."""
        kinds = self.kinds
        trail = self.trail
        while True:
            self.conflicts += 1
            idx = len(trail) - 1
            while idx >= 0 and kinds[idx] != OPEN:
                idx -= 1
            if idx < 0:
                return False
            if self._island is not None and idx < self._island_height:
                self._island = None  # prefix under the island changed
            var = trail[idx]
            value = self.assigned[var]
            lowest = self._unassign_to(idx)
            if lowest < self._head:
                self._head = lowest
            queue = []
            conflict = self._assign(var, 1 - value, FORCED, queue)
            if conflict < 0 and self._propagate(queue) < 0:
                return True

    # -- decision helpers ----------------------------------------------

    def _pending_rows(self, var: int, cap: int) -> int:
        """Number of unsatisfied rows containing var; -1 once above cap."""
        satsum = self.satsum
        bounds = self.bounds
        count = 0
        for occ in (self.pos_rows[var], self.neg_rows[var]):
            for r in occ:
                if satsum[r] < bounds[r]:
                    count += 1
                    if count > cap:
                        return -1
        return count

    def _flood_island(self, start: int):
        """Connected component of unsatisfied rows around `start`.

        Returns the set of unassigned variables in the component, or
        None once it exceeds ISLAND_LIMIT.
        """
        assigned = self.assigned
        satsum = self.satsum
        bounds = self.bounds
        lits = self.lits
        seen_rows = set()
        vars_seen = {start}
        stack = [start]
        while stack:
            var = stack.pop()
            for occ in (self.pos_rows[var], self.neg_rows[var]):
                for ridx in occ:
                    if ridx in seen_rows or satsum[ridx] >= bounds[ridx]:
                        continue
                    seen_rows.add(ridx)
                    for lit in lits[ridx]:
                        v = lit if lit > 0 else -lit
                        if assigned[v] == UNASSIGNED and v not in vars_seen:
                            vars_seen.add(v)
                            if len(vars_seen) > ISLAND_LIMIT:
                                return None
                            stack.append(v)
        return vars_seen

    def _decide(self, var: int) -> bool:
        self.decisions += 1
        queue = []
        conflict = self._assign(var, self.phases[var], OPEN, queue)
        if conflict >= 0 or self._propagate(queue) >= 0:
            return self._backtrack()
        return True

    # -- main loop -------------------------------------------------------

    def solve(
        self,
        deadline=None,
        max_steps=None,
        collect=None,
        lock_islands: bool = True,
    ):
        """Run the search to completion (or deadline/step budget).

        With `collect`, every model is passed to the callback and the
        search keeps going (exhaustively, autarky reductions disabled)
        until the callback returns False or the tree is spent.
        """
        if self.root_conflict:
            return UNSAT, None
        if collect is None and lock_islands and self.use_native:
            from . import native

            core = native.load()
            if core is not None:
                return native.run(core, self, deadline, max_steps)
        return self._solve_python(deadline, max_steps, collect, lock_islands)

    def _solve_python(
        self,
        deadline=None,
        max_steps=None,
        collect=None,
        lock_islands: bool = True,
    ):
        if self.root_conflict:
            return UNSAT, None
        enumerating = collect is not None
        queue = list(range(self.nrows))
        for r in queue:
            self.queued[r] = 1
        if self._propagate(queue) >= 0:
            return UNSAT, None
        assigned = self.assigned
        steps = 0
        while True:
            steps += 1
            if steps & 1023 == 0:
                if deadline is not None and time.monotonic() > deadline:
                    return UNKNOWN, None
                if max_steps is not None and self.decisions > max_steps:
                    return UNKNOWN, None
            if self._island is not None:
                if len(self.trail) < self._island_height:
                    self._island = None  # backtracked out, resume normally
                else:
                    var = 0
                    for v in self._island:
                        if assigned[v] == UNASSIGNED and (var == 0 or v < var):
                            var = v
                    if var == 0:
                        # Complete and consistent: freeze its decisions.
                        for i in range(self._island_height, len(self.trail)):
                            if self.trail[i] in self._island:
                                self.kinds[i] = FORCED
                        self._island = None
                        self.islands += 1
                    else:
                        if not self._decide(var):
                            return UNSAT, None
                        continue
            head = self._head
            while head <= self.nvars and assigned[head] != UNASSIGNED:
                head += 1
            self._head = head
            if head > self.nvars:
                model = Model(tuple([0] + assigned[1:]))
                if not enumerating:
                    return SAT, model
                if not collect(model):
                    return SAT, model
                if not self._backtrack():
                    return UNSAT, None
                continue
            if not enumerating:
                pending = self._pending_rows(head, ISLAND_ROW_GATE)
                if pending == 0:
                    # Occurs only in satisfied rows: fix it, never revisit.
                    self._assign(head, 0, FORCED, [])
                    continue
                if lock_islands and pending > 0:
                    component = self._flood_island(head)
                    if component is not None:
                        self._island = component
                        self._island_height = len(self.trail)
                        continue
            if not self._decide(head):
                return UNSAT, None


def solve_formula(
    formula: PbFormula,
    timeout=None,
    max_steps=None,
    phases=None,
    use_native: bool = True,
):
    solver = RefSolver(formula, phases=phases, use_native=use_native)
    deadline = None if timeout is None else time.monotonic() + timeout
    return solver.solve(deadline=deadline, max_steps=max_steps)


def enumerate_models(formula: PbFormula, limit=None):
    """Every satisfying assignment, in deterministic search order."""
    out = []

    def keep(model):
        out.append(model)
        return limit is None or len(out) < limit

    RefSolver(formula).solve(collect=keep)
    return out
