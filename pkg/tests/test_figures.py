"""Figure rendering smoke tests."""
from loclim.experiments import ExperimentConfig, geometric_grid, run_clt_experiment, run_rate_experiment
from loclim.figures import render_figures
from loclim.processes import fbm

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_rate_and_clt_figures(tmp_path):
    rate = run_rate_experiment(
        ExperimentConfig(
            spec=fbm(0.1),
            eps_grid=geometric_grid(2.0**-4, 0.5, 3),
            eps_ref=2.0**-10,
            replicates=6,
            n_t=2048,
            master_seed=3,
        )
    )
    clt = run_clt_experiment(
        ExperimentConfig(
            spec=fbm(1.0 / 3.0),
            eps_grid=geometric_grid(2.0**-4, 0.5, 3),
            eps_ref=2.0**-10,
            replicates=6,
            n_t=2048,
            master_seed=4,
            hurst_label="1/3",
        )
    )
    paths = render_figures([rate.to_dict(), clt.to_dict()], tmp_path)
    assert len(paths) == 2
    for p in paths:
        assert p.read_bytes()[:8] == PNG_MAGIC
        assert p.stat().st_size > 5_000
