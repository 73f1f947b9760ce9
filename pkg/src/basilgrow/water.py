"""Deterministic controller for the tank-and-three-containers water loop.

Physical layout: a supply tank feeds container 1 through a pump; two
inter-container valves cascade water 1 -> 2 -> 3; a drain valve returns
container 3 to the tank.  The controller is memoryless: actuator
positions are a pure function of the level readings and the drain
request, so every state carries actuators consistent with its own
levels and a single step function fully defines the system.

Control law, in priority order:

1. A requested drain runs to completion first: pump off, inter-valves
   closed, drain valve open, water moves container 3 -> tank.  The
   request clears itself once container 3 is empty.
2. Otherwise containers fill strictly in order 1 -> 2 -> 3: the pump is
   on while any container sits below its target, water goes to the first
   container below target, and inter-valve ``i`` is open only when every
   container before position ``i`` is already at target (a transit path,
   not a source).
3. When all containers are at target the pump stops, every valve closes,
   and the state is a fixpoint.

Levels are integer percentages.  The tank is backed by a supply main:
its level drops as water is pumped out but delivery never stalls at
zero, and drained water above 100 overflows back to the main.  Tank
bookkeeping is therefore observational only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigError


@dataclass(frozen=True)
class WaterSystemState:
    """Levels, targets and actuator positions at one tick."""

    tank: int
    containers: tuple[int, int, int]
    targets: tuple[int, int, int]
    pump_on: bool = False
    inter_valves: tuple[bool, bool] = (False, False)
    drain_open: bool = False
    drain_requested: bool = False

    def all_at_target(self) -> bool:
        return all(c >= t for c, t in zip(self.containers, self.targets))


def _actuators(
    containers: tuple[int, int, int], targets: tuple[int, int, int], drain_requested: bool
) -> tuple[bool, tuple[bool, bool], bool]:
    """Control law: (pump_on, inter_valves, drain_open) for given readings."""
    if drain_requested and containers[2] > 0:
        return False, (False, False), True
    below = [c < t for c, t in zip(containers, targets)]
    if any(below):
        first = below.index(True)
        return True, (first >= 1, first >= 2), False
    return False, (False, False), False


def with_consistent_actuators(state: WaterSystemState) -> WaterSystemState:
    """Copy of ``state`` with actuators recomputed from its own levels."""
    pump, valves, drain = _actuators(state.containers, state.targets, state.drain_requested)
    return replace(state, pump_on=pump, inter_valves=valves, drain_open=drain)


def _validate(state: WaterSystemState) -> None:
    for name, level in (("tank", state.tank), *zip("123", state.containers)):
        if not 0 <= level <= 100:
            raise ConfigError(f"container {name} level {level} outside 0..100")
    for t in state.targets:
        if not 0 <= t <= 100:
            raise ConfigError(f"target {t} outside 0..100")


def water_step(state: WaterSystemState, rate: int = 5) -> WaterSystemState:
    """Advance one tick, moving at most ``rate`` percent of one container.

    The returned state's actuator fields are the control-law outputs for
    its *new* levels, so the published invariants (pump on implies some
    container below target; drain open implies pump off) hold for every
    state this function produces.
    """
    if rate < 1:
        raise ConfigError(f"rate must be >= 1, got {rate}")
    _validate(state)

    pump, _, drain = _actuators(state.containers, state.targets, state.drain_requested)
    tank = state.tank
    levels = list(state.containers)
    if drain:
        moved = min(rate, levels[2])
        levels[2] -= moved
        tank = min(100, tank + moved)
    elif pump:
        below = [c < t for c, t in zip(levels, state.targets)]
        first = below.index(True)
        moved = min(rate, state.targets[first] - levels[first])
        levels[first] += moved
        tank = max(0, tank - moved)

    containers = (levels[0], levels[1], levels[2])
    requested = state.drain_requested and containers[2] > 0
    new_pump, new_valves, new_drain = _actuators(containers, state.targets, requested)
    return WaterSystemState(
        tank=tank,
        containers=containers,
        targets=state.targets,
        pump_on=new_pump,
        inter_valves=new_valves,
        drain_open=new_drain,
        drain_requested=requested,
    )


def run_to_terminal(
    state: WaterSystemState, rate: int = 5, max_ticks: int | None = None
) -> list[WaterSystemState]:
    """Trajectory from ``state`` to the all-at-target fixpoint (inclusive).

    ``max_ticks`` defaults to the analytic bound: the tick count for the
    pending drain plus one per-container fill deficit, each rounded up to
    whole ticks, plus three slack ticks.
    """
    if max_ticks is None:
        drain = state.containers[2] if state.drain_requested else 0
        after3 = 0 if state.drain_requested else state.containers[2]
        deficits = (
            max(state.targets[0] - state.containers[0], 0),
            max(state.targets[1] - state.containers[1], 0),
            max(state.targets[2] - after3, 0),
        )
        max_ticks = sum(-(-d // rate) for d in (drain, *deficits)) + 3
    trajectory = [state]
    for _ in range(max_ticks):
        nxt = water_step(state, rate)
        trajectory.append(nxt)
        if nxt == state:
            return trajectory
        state = nxt
    raise ConfigError(
        f"no fixpoint within {max_ticks} ticks; final state {trajectory[-1]}"
    )


@dataclass
class ModelCheckResult:
    states_visited: int
    start_states: int
    longest_run: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_controller(levels: tuple[int, ...] = (0, 25, 50, 75, 100), rate: int = 25) -> ModelCheckResult:
    """Exhaustively model-check the controller over a level grid.

    Start states: every combination of tank level, container levels and
    targets on the grid, with and without a drain request, actuators
    normalized to the control law.  The step function is deterministic,
    so the search walks each trajectory once, checking on every visited
    state that

    * pump on implies some container is below target,
    * an open drain implies the pump is off,
    * an open inter-valve implies the containers before it are at target,

    and that the all-at-target fixpoint arrives within the analytic
    tick bound.
    """
    violations: list[str] = []
    seen: set[WaterSystemState] = set()
    starts = 0
    longest = 0
    lv = list(levels)
    for tank in lv:
        for c1 in lv:
            for c2 in lv:
                for c3 in lv:
                    for t1 in lv:
                        for t2 in lv:
                            for t3 in lv:
                                for req in (False, True):
                                    starts += 1
                                    s = with_consistent_actuators(
                                        WaterSystemState(
                                            tank=tank,
                                            containers=(c1, c2, c3),
                                            targets=(t1, t2, t3),
                                            drain_requested=req,
                                        )
                                    )
                                    try:
                                        run = run_to_terminal(s, rate)
                                    except ConfigError as err:
                                        violations.append(f"liveness: {err}")
                                        continue
                                    longest = max(longest, len(run) - 1)
                                    for st in run:
                                        if st in seen:
                                            continue
                                        seen.add(st)
                                        _check_state(st, violations)
                                    if not run[-1].all_at_target():
                                        violations.append(f"non-terminal fixpoint: {run[-1]}")
    return ModelCheckResult(
        states_visited=len(seen),
        start_states=starts,
        longest_run=longest,
        violations=violations,
    )


def _check_state(st: WaterSystemState, violations: list[str]) -> None:
    below = [c < t for c, t in zip(st.containers, st.targets)]
    if st.pump_on and not any(below):
        violations.append(f"pump on with all containers at target: {st}")
    if st.drain_open and st.pump_on:
        violations.append(f"drain open while pump on: {st}")
    if st.inter_valves[0] and below[0]:
        violations.append(f"valve 1 open before container 1 at target: {st}")
    if st.inter_valves[1] and (below[0] or below[1]):
        violations.append(f"valve 2 open before containers 1,2 at target: {st}")
