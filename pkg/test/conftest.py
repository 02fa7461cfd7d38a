from typing import Optional, Sequence, Tuple

import pytest

from wrsn_sched.config import SchedConfig
from wrsn_sched.instances import Area, Charger, MobilityTrace, ProblemInstance, SensorNode, Variant

BATTERY = 10800.0

Point = Tuple[float, float]


def p2_instance(
    positions: Sequence[Point],
    residuals: Optional[Sequence[float]] = None,
    prizes: Optional[Sequence[int]] = None,
    energy_capacity: float = 1e7,
    travel_energy: float = 1.0,
    transfer_rate: float = 40.0,
    speed: float = 5.0,
    alpha: float = 0.2,
    side: float = 1000.0,
    depot: Point = (0.0, 0.0),
) -> ProblemInstance:
    residuals = list(residuals) if residuals is not None else [0.0] * len(positions)
    prizes = list(prizes) if prizes is not None else [1] * len(positions)
    nodes = [
        SensorNode(id=i, position=p, battery_capacity=BATTERY, residual=r, prize=prize)
        for i, (p, r, prize) in enumerate(zip(positions, residuals, prizes), start=1)
    ]
    charger = Charger(
        depot=depot,
        end_point=depot,
        speed=speed,
        transfer_rate=transfer_rate,
        travel_energy=travel_energy,
        energy_capacity=energy_capacity,
    )
    return ProblemInstance(Variant.P2_FULLY_CHARGING, nodes, charger, Area.square(side), alpha=alpha)


def p3_instance(
    positions: Sequence[Point],
    radius: float,
    residuals: Sequence[float],
    betas: Optional[Sequence[float]] = None,
    k: int = 1,
    side: float = 100.0,
    speed: float = 5.0,
    transfer_rate: float = 20.0,
    alpha: float = 0.45,
    depot: Optional[Point] = None,
) -> ProblemInstance:
    betas = list(betas) if betas is not None else [1.0] * len(positions)
    nodes = [
        SensorNode(
            id=i,
            position=p,
            battery_capacity=BATTERY,
            residual=r,
            consumption_rate=beta,
            sensing_radius=radius,
            deadline=r / beta,
        )
        for i, (p, r, beta) in enumerate(zip(positions, residuals, betas), start=1)
    ]
    depot = depot if depot is not None else (side / 2, side / 2)
    charger = Charger(depot=depot, end_point=depot, speed=speed, transfer_rate=transfer_rate, travel_energy=600.0)
    return ProblemInstance(Variant.P3_KCOVERAGE, nodes, charger, Area.square(side), alpha=alpha, coverage_k=k)


def p1_instance(
    tracks: Sequence[Sequence[Tuple[float, Point]]],
    residuals: Sequence[float],
    timespan: float = 100.0,
    speed: float = 5.0,
    transfer_rate: float = 40.0,
    max_speed: float = 1.0,
    side: float = 100.0,
    depot: Point = (0.0, 0.0),
    end_point: Point = (0.0, 0.0),
) -> ProblemInstance:
    nodes = [
        SensorNode(
            id=i,
            position=track[0][1],
            battery_capacity=BATTERY,
            residual=r,
            trajectory=MobilityTrace(track, max_speed),
        )
        for i, (track, r) in enumerate(zip(tracks, residuals), start=1)
    ]
    charger = Charger(
        depot=depot,
        end_point=end_point,
        speed=speed,
        transfer_rate=transfer_rate,
        travel_energy=0.0,
        timespan=timespan,
    )
    return ProblemInstance(
        Variant.P1_MOBILE_PATH, nodes, charger, Area.square(side), alpha=0.9, epsilon_charge=0.1
    )


def still(point: Point, timespan: float = 100.0) -> Tuple[Tuple[float, Point], ...]:
    return ((0.0, point), (timespan, point))


@pytest.fixture
def make_p1():
    return p1_instance


@pytest.fixture
def make_p2():
    return p2_instance


@pytest.fixture
def make_p3():
    return p3_instance


@pytest.fixture
def still_track():
    return still


@pytest.fixture
def p2_line():
    """Three empty nodes on the x axis, 100 m apart, depot at the origin."""
    return p2_instance([(100.0, 0.0), (200.0, 0.0), (300.0, 0.0)])


@pytest.fixture
def p3_triple():
    """Three requesters around the centre of a 100 m square, every point covered three times."""
    return p3_instance(
        [(40.0, 50.0), (50.0, 50.0), (60.0, 50.0)], radius=80.0, residuals=[1000.0, 1000.0, 1000.0], k=2
    )


@pytest.fixture
def p1_pair():
    """Two stationary nodes below the charging target."""
    return p1_instance([still((30.0, 40.0)), still((60.0, 80.0))], residuals=[8000.0, 8000.0])


@pytest.fixture
def config():
    return SchedConfig(
        episodes=3,
        p=8,
        rounds=2,
        warmup=1,
        batch_size=2,
        capacity=50,
        restarts=5,
        acs_agents=4,
        acs_iterations=5,
        train_instances=2,
        log_every=1,
    )
