"""Shared fixture builders for the test suite."""

from tbm_advisor.domain import N_COP, N_CXP, GroundClass, OptimalityConfig, validate_record


def make_record(
    timestamp=0.0,
    tunnel_length=0.0,
    advance_rate=10.0,
    working_pressure=50.0,
    cop=None,
    cxp=None,
    ground_class=GroundClass.GC1,
):
    return validate_record(
        timestamp=timestamp,
        tunnel_length=tunnel_length,
        advance_rate=advance_rate,
        working_pressure=working_pressure,
        cop=cop if cop is not None else [1.0] * N_COP,
        cxp=cxp if cxp is not None else [0.5] * N_CXP,
        ground_class=ground_class,
    )


def make_drive(n, spacing=10.0, tl_step=0.01, **kwargs):
    """Strictly advancing drive with uniform sampling."""
    return [
        make_record(timestamp=i * spacing, tunnel_length=i * tl_step, **kwargs)
        for i in range(n)
    ]


def sim_config(gc=GroundClass.GC1):
    """The simulator-flavored score configuration used across tests."""
    return OptimalityConfig(
        ground_class=gc,
        penalty_below=0.8,
        penalty_above=3.0,
        margin_bound=114.0,
        max_advance_rate=30.0,
        shutdown_pressure=150.0,
        norm_min=-1.0,
        norm_max=1.0,
    )


def random_records(rng, n, gc=GroundClass.GC1, spacing=10.0):
    """Records with random standardized-looking features."""
    records = []
    tl = 0.0
    for i in range(n):
        tl += rng.uniform(0.001, 0.01)
        records.append(
            make_record(
                timestamp=i * spacing,
                tunnel_length=tl,
                advance_rate=float(rng.uniform(1, 30)),
                working_pressure=float(rng.uniform(10, 140)),
                cop=rng.normal(size=N_COP),
                cxp=rng.normal(size=N_CXP),
                ground_class=gc,
            )
        )
    return records
