import numpy as np
import pytest

from lhsim.cli import main

# small-but-real knobs: enough statistics for the cache thresholds to
# resolve, tiny engine load so the whole module runs in seconds
FAST = [
    "--set", "linkchar.blocks_per_point=400",
    "--set", "deploy.users_per_cell=4",
    "--set", "engine.n_tti=20",
    "--set", "engine.n_sym=60",
    "--set", "run.iterations=1",
]


def fast_args(tmp_path, *extra):
    return [*FAST,
            "--set", f"run.cache={tmp_path / 'cache.txt'}",
            "--out", str(tmp_path / "results"), *extra]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One tiny threshold cache shared by the command tests."""
    path = tmp_path_factory.mktemp("cli")
    assert main(["linkchar", *fast_args(path)]) == 0
    return path


class TestLinkchar:
    def test_writes_cache_and_prints_thresholds(self, tmp_path, capsys):
        assert main(["linkchar", *fast_args(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert (tmp_path / "cache.txt").exists()
        assert "cqi_subgroup_threshold_db" in out
        assert "0.5 LP awgn" in out

    def test_rerun_is_cache_hit(self, workdir):
        before = (workdir / "cache.txt").read_text()
        assert main(["linkchar", *fast_args(workdir)]) == 0
        assert (workdir / "cache.txt").read_text() == before

    def test_force_recomputes_same_content(self, workdir):
        before = (workdir / "cache.txt").read_text()
        assert main(["linkchar", *fast_args(workdir), "--force"]) == 0
        assert (workdir / "cache.txt").read_text() == before

    def test_corrupted_cache_fails_loudly(self, tmp_path, capsys):
        assert main(["linkchar", *fast_args(tmp_path)]) == 0
        cache = tmp_path / "cache.txt"
        cache.write_text(cache.read_text().replace("0.500 LP", "0.500 XX", 1))
        assert main(["run", *fast_args(tmp_path)]) == 2
        assert "checksum" in capsys.readouterr().err


class TestRun:
    def test_lhs_writes_metrics(self, workdir, capsys):
        assert main(["run", *fast_args(workdir), "--scheme", "lhs",
                     "--seed", "5"]) == 0
        path = workdir / "results" / "metrics_lhs_seed5.txt"
        assert path.exists()
        text = path.read_text()
        assert "# config_hash=" in text
        assert "local_hd cell0" in text
        assert "sr_hls_service2 cell0" in text

    def test_scptm_writes_metrics(self, workdir):
        assert main(["run", *fast_args(workdir), "--scheme", "scptm"]) == 0
        text = (workdir / "results" / "metrics_scptm_seed1.txt").read_text()
        assert "mr_hls_hd cell0" in text
        assert "sr_hls_service1" not in text

    def test_rerun_bit_identical(self, workdir):
        args = ["run", *fast_args(workdir), "--scheme", "lhs", "--seed", "6"]
        assert main(args) == 0
        path = workdir / "results" / "metrics_lhs_seed6.txt"
        first = path.read_bytes()
        assert main(args) == 0
        assert path.read_bytes() == first

    def test_missing_cache_is_an_error(self, tmp_path, capsys):
        assert main(["run", *fast_args(tmp_path)]) == 2
        assert "linkchar" in capsys.readouterr().err

    def test_every_row_has_interval(self, workdir):
        text = (workdir / "results" / "metrics_lhs_seed5.txt").read_text()
        rows = [l.split() for l in text.splitlines() if not l.startswith("#")]
        for name, pop, value, lo, hi in rows:
            if not np.isnan(float(value)):
                assert float(lo) <= float(value) <= float(hi)


class TestSweep:
    def test_hcg_table(self, workdir):
        assert main(["sweep", "hcg", *fast_args(workdir)]) == 0
        lines = (workdir / "results" / "sweep_hcg.txt").read_text().splitlines()
        body = [l for l in lines if not l.startswith("#")]
        assert len(body) == 7
        hcg = [float(l.split()[0]) for l in body]
        assert hcg == sorted(hcg)
        assert all(len(l.split()) == 5 for l in body)

    def test_distance_table(self, workdir):
        assert main(["sweep", "distance", *fast_args(workdir)]) == 0
        lines = (workdir / "results" /
                 "sweep_distance.txt").read_text().splitlines()
        header = [l for l in lines if l.startswith("#")]
        assert any("hd_adaptive" in l and "hd_same" in l for l in header)
        body = [l.split() for l in lines if not l.startswith("#")]
        assert len(body) == 6
        assert float(body[-1][1]) == pytest.approx(
            1.0 * 1000.0)  # last bin ends at the drop radius (cell radius 1 km)

    def test_drop_radius_table(self, workdir):
        assert main(["sweep", "drop_radius", *fast_args(workdir)]) == 0
        lines = (workdir / "results" /
                 "sweep_drop_radius.txt").read_text().splitlines()
        body = [l.split() for l in lines if not l.startswith("#")]
        assert [float(r[0]) for r in body] == [0.2, 0.4, 0.6, 0.8, 1.0]


class TestErrors:
    def test_unknown_key(self, capsys):
        assert main(["run", "--set", "bogus.key=1"]) == 2
        assert "bogus.key" in capsys.readouterr().err

    def test_bad_set_syntax(self, capsys):
        assert main(["run", "--set", "no-equals"]) == 2
        assert "KEY=VALUE" in capsys.readouterr().err

    def test_constraint_violation(self, capsys):
        assert main(["run", "--set", "sys.subcarrier_spacing_hz=0"]) == 2
        assert "sys.subcarrier_spacing_hz" in capsys.readouterr().err

    def test_unknown_subcommand_rejected(self):
        with pytest.raises(SystemExit):
            main(["plot"])

    def test_unknown_sweep_kind_rejected(self):
        with pytest.raises(SystemExit):
            main(["sweep", "throughput"])
