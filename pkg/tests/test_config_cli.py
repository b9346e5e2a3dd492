"""Spec files, CLI subcommands, exit codes, artifact determinism."""

import numpy as np
import pytest

from spnsim import cli, config_io, examples, network
from spnsim.config_io import ConfigError, dump_coupling, dump_network, load_coupling, load_network


def run_cli(*argv):
    return cli.main(list(argv))


# ---------------------------------------------------------------------------
# config round trips


@pytest.mark.parametrize("name", examples.example_names())
def test_spec_round_trip(tmp_path, name):
    spec, desc = examples.build_example(name)
    path = tmp_path / f"{name}.toml"
    dump_network(spec, path, header=desc)
    again = load_network(path)
    net_a = network.validate(spec)
    net_b = network.validate(again)
    assert np.allclose(net_a.routing, net_b.routing)
    assert np.allclose(net_a.throughput, net_b.throughput)
    assert net_a.partition == net_b.partition
    assert net_a.synchronized == net_b.synchronized
    assert [s.kind for s in net_a.services] == [s.kind for s in net_b.services]
    assert [a.kind for a in net_a.arrivals] == [a.kind for a in net_b.arrivals]


def test_every_example_validates():
    for name in examples.example_names():
        spec, _ = examples.build_example(name)
        network.validate(spec)


def test_spec_version_required(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('buffers = 3\n')
    with pytest.raises(ConfigError):
        load_network(path)


def test_sparse_routing(tmp_path):
    spec, _ = examples.build_example("rybko-stolyar")
    path = tmp_path / "rs.toml"
    dump_network(spec, path)
    text = path.read_text()
    dense_row = "dense = [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], " \
                "[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.0, 0.0]]"
    assert dense_row in text
    sparse = text.replace(dense_row, "sparse = [[1, 2, 1.0], [3, 4, 1.0]]")
    path.write_text(sparse)
    again = load_network(path)
    assert np.allclose(again.routing, spec.routing)


def test_coupling_round_trip(tmp_path):
    from conftest import RS_COUPLING
    path = tmp_path / "z.toml"
    dump_coupling(RS_COUPLING, path)
    assert np.array_equal(load_coupling(path), RS_COUPLING)


# ---------------------------------------------------------------------------
# CLI behavior and exit codes


def test_cli_example_then_validate(tmp_path):
    assert run_cli("example", "rybko-stolyar", "--out", str(tmp_path)) == 0
    spec_file = tmp_path / "rybko-stolyar.toml"
    assert spec_file.exists()
    assert run_cli("validate", "--spec", str(spec_file)) == 0


def test_cli_example_unstable_variant(tmp_path):
    assert run_cli("example", "rybko-stolyar", "--unstable", "--out", str(tmp_path)) == 0
    text = (tmp_path / "rybko-stolyar-unstable.toml").read_text()
    assert "static-priority" in text
    assert run_cli("example", "tandem", "--unstable", "--out", str(tmp_path)) == 3


def test_cli_validate_rejects_bad_partition(tmp_path):
    spec, _ = examples.build_example("single-server-2buf")
    spec.partition = ((0,), (1,))           # both buffers share the processor
    path = tmp_path / "bad.toml"
    dump_network(spec, path)
    assert run_cli("validate", "--spec", str(path)) == 3


def test_cli_certify_report(tmp_path, capsys):
    code = run_cli("certify", "--example", "rybko-stolyar", "--epsilon", "0.1",
                   "--max-slack", "--out", str(tmp_path))
    out = capsys.readouterr().out
    assert code == 0
    assert "holds = true" in out
    assert "eta = 0.46" in out
    report = (tmp_path / "certificate_report.toml").read_text()
    assert "max_slack = 0.4285714285714286" in report


def test_cli_certify_violation_exit_code(tmp_path):
    # identity coupling cannot certify the shared-processor pair
    dump_coupling(np.eye(2), tmp_path / "z.toml")
    code = run_cli("certify", "--example", "single-server-2buf",
                   "--z", str(tmp_path / "z.toml"), "--out", str(tmp_path))
    assert code == 2
    report = (tmp_path / "certificate_report.toml").read_text()
    assert "holds = false" in report
    assert "witness_buffer" in report


def test_cli_simulate_writes_artifacts(tmp_path):
    code = run_cli("simulate", "--example", "tandem", "--policy", "lrfs",
                   "--horizon", "2000", "--seed", "9", "--out", str(tmp_path))
    assert code == 0
    traj = tmp_path / "trajectory_seed9.csv"
    summary = (tmp_path / "summary_seed9.toml").read_text()
    assert traj.exists()
    assert "time_avg_norm = " in summary
    assert "tail_slope = " in summary
    assert "seed = 9" in summary
    assert "events_processed = " in summary
    head = traj.read_text().splitlines()[0]
    assert head == "t,norm,Q_1,Q_2,V_1,V_2"


def test_cli_simulate_expect_stable_gate(tmp_path):
    code = run_cli("simulate", "--example", "rybko-stolyar",
                   "--policy", "static-priority", "--priority-order", "4,1,2,3",
                   "--horizon", "20000", "--seed", "7",
                   "--expect-stable", "--out", str(tmp_path))
    assert code == 2


def test_cli_artifacts_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert run_cli("simulate", "--example", "single-server-2buf",
                       "--policy", "eps-lrfs", "--epsilon", "0.25",
                       "--horizon", "3000", "--seed", "13",
                       "--audit", "--out", str(out)) == 0
    name = "trajectory_seed13.csv"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    assert ((out_a / "summary_seed13.toml").read_bytes()
            == (out_b / "summary_seed13.toml").read_bytes())
    assert ((out_a / "stability_report.toml").read_bytes()
            == (out_b / "stability_report.toml").read_bytes())


def test_cli_tsv_format(tmp_path):
    assert run_cli("simulate", "--example", "single-server-2buf",
                   "--policy", "lrfs", "--horizon", "1000", "--seed", "2",
                   "--format", "tsv", "--out", str(tmp_path)) == 0
    head = (tmp_path / "trajectory_seed2.tsv").read_text().splitlines()[0]
    assert head.split("\t") == ["t", "norm", "Q_1", "Q_2", "V_1", "V_2"]


def test_cli_analyze_round_trip(tmp_path):
    run_cli("simulate", "--example", "tandem", "--policy", "lrfs",
            "--horizon", "2000", "--seed", "9", "--out", str(tmp_path))
    code = run_cli("analyze", str(tmp_path / "trajectory_seed9.csv"),
                   "--out", str(tmp_path))
    assert code == 0
    assert "verdict" in (tmp_path / "stability_report.toml").read_text()


def test_cli_drift_smoke(tmp_path):
    code = run_cli("drift", "--example", "rybko-stolyar", "--policy", "lrfs",
                   "--epsilon", "0.1", "--horizon", "5000", "--seed", "2",
                   "--backlog", "1:100", "--audit", "--out", str(tmp_path))
    assert code == 0
    report = (tmp_path / "drift_report.toml").read_text()
    assert "verdict" in report
    assert "audit_violations = 0" in report
    bins = (tmp_path / "drift_bins_seed2.csv").read_text().splitlines()
    assert bins[0] == "|Y|_lo,|Y|_hi,n,mean_increment,stderr"
    traj_head = (tmp_path / "trajectory_seed2.csv").read_text().splitlines()[0]
    assert traj_head.endswith(",Lglo")


def test_cli_missing_input_is_config_error(tmp_path):
    assert run_cli("validate", "--spec", str(tmp_path / "nope.toml")) == 3
    assert run_cli("simulate", "--example", "tandem", "--policy", "lrfs") == 3
    assert run_cli("frobnicate") == 3
