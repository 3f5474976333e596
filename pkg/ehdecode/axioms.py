RATE_CAP = 60.0

FEASIBILITY_TOL = 1e-9

solver_defaults = dict(
    outer_tol=1e-8,
    outer_max_iters=10_000,
    two_hop_tol=1e-6,
    sca_tol=1e-8,
    sca_max_iters=200,
    alpha_floor=1e-9,
    cache_quantum=1e-12,
)

gp_defaults = dict(
    tol=1e-9,
    max_newton=50,
    max_stages=30,
    armijo=0.25,
    backtrack=0.5,
    growth=10.0,
)

oracle_limits = dict(
    max_slots=4,
    max_points=60_000_000,
    chunk_points=2_000_000,
)

roles = dict(
    single_user=("tx", "rx"),
    two_hop=("tx", "relay", "rx"),
    mac=("tx1", "tx2", "rx"),
    bc=("tx", "rx1", "rx2"),
)

receiver_roles = ("rx", "rx1", "rx2")

single_user_example = dict(
    tx=[2.0, 2.0, 1.0, 2.5, 0.5],
    rx=[1.0, 1.0, 0.5, 2.5, 3.0],
    rates=[0.6061, 0.6061, 0.6061, 1.2528, 1.3863],
)

mac_example = dict(
    tx1=[0.5, 1.0, 2.0],
    tx2=[1.0, 2.0, 0.5],
    rx=[1.5, 2.0, 0.5],
)

bc_example = dict(
    tx=[5.0, 6.0, 7.0],
    sigma2=2.0,
    A=dict(rx1=[4.0, 5.0, 6.0], rx2=[1.0, 2.0, 3.0]),
    B=dict(rx1=[3.0, 4.0, 5.0], rx2=[1.0, 1.5, 2.0]),
    C=dict(rx1=[2.0, 3.0, 4.0], rx2=[0.5, 1.0, 1.5]),
)
