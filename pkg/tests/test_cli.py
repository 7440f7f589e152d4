import json

import numpy as np
import pytest

from cascademix import io
from cascademix.cli import SEED_ENV, main, resolve
from cascademix.errors import ValidationError
from cascademix.likelihood import CascadeSet

SMALL = ["--n", "12", "--p", "0.2", "--psi-rank", "2", "--factor-density", "0.3", "--n-cascades", "120"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--out", out, "--seed", 3, *SMALL) == 0
    return out


# --- file formats ------------------------------------------------------------------------------


def test_cascade_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = np.where(rng.random((5, 4)) < 0.6, rng.uniform(0, 3, (5, 4)), 3.0)
    t[:, 0] = 0.0
    cs = CascadeSet(t, 3.0)
    io.write_cascades(tmp_path / "c.csv", cs, "h")
    back = io.read_cascades(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.times, cs.times)
    assert back.window == 3.0
    meta = json.loads(io.sidecar_path(tmp_path / "c.csv").read_text())
    assert meta["config_hash"] == "h" and meta["n_nodes"] == 4 and "tool_version" in meta


def test_network_and_pi_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    net = rng.random((4, 4)) * (rng.random((4, 4)) < 0.5)
    np.fill_diagonal(net, 0)
    io.write_network(tmp_path / "n.csv", net)
    np.testing.assert_array_equal(io.read_network(tmp_path / "n.csv"), net)
    pi = rng.random(4)
    io.write_pi(tmp_path / "p.csv", pi)
    np.testing.assert_array_equal(io.read_pi(tmp_path / "p.csv"), pi)


def test_reader_rejects_bad_files(tmp_path):
    with pytest.raises(ValidationError):
        io.read_cascades(tmp_path / "missing.csv")
    io.write_network(tmp_path / "n.csv", np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        io.read_cascades(tmp_path / "n.csv")  # wrong kind of sidecar
    (tmp_path / "bare.csv").write_text("src,dst,weight\n")
    with pytest.raises(ValidationError):
        io.read_network(tmp_path / "bare.csv")  # no sidecar


# --- simulate ----------------------------------------------------------------------------------


def test_simulate_outputs(sim_dir):
    names = {p.name for p in sim_dir.iterdir()}
    for stem in ("theta", "psi", "pi", "mask", "cascades", "z"):
        assert f"{stem}.csv" in names and f"{stem}.csv.json" in names
    manifest = json.loads((sim_dir / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3
    assert manifest["files"]["cascades.csv"] == io.file_digest(sim_dir / "cascades.csv")
    hashes = {json.loads(io.sidecar_path(sim_dir / f"{s}.csv").read_text())["config_hash"]
              for s in ("theta", "cascades", "z")}
    assert hashes == {manifest["config_hash"]}


def test_simulate_row_count_matches_activations(sim_dir):
    cs = io.read_cascades(sim_dir / "cascades.csv")
    rows = (sim_dir / "cascades.csv").read_text().strip().split("\n")[1:]
    assert len(rows) == int(cs.n_activated().sum())
    assert cs.n_cascades == 120 and io.read_indicators(sim_dir / "z.csv").shape == (120, 12)


def test_zero_cascades(tmp_path):
    assert run("simulate", "--out", tmp_path, "--n", 5, "--n-cascades", 0) == 0
    assert (tmp_path / "cascades.csv").read_text() == "cascade_id,node_id,time\n"
    assert io.read_cascades(tmp_path / "cascades.csv").times.shape == (0, 5)
    json.loads((tmp_path / "manifest.json").read_text())


def test_simulate_is_deterministic(tmp_path, sim_dir):
    assert run("simulate", "--out", tmp_path, "--seed", 3, *SMALL) == 0
    for name in ("cascades.csv", "theta.csv", "z.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (sim_dir / name).read_bytes()


@pytest.mark.slow
def test_published_scale_simulation(tmp_path):
    assert run("simulate", "--out", tmp_path, "--n", 200, "--n-cascades", 2000, "--window", 10, "--seed", 1) == 0
    cs = io.read_cascades(tmp_path / "cascades.csv")
    rows = (tmp_path / "cascades.csv").read_text().count("\n") - 1
    assert rows == int(cs.n_activated().sum()) and cs.n_cascades == 2000


# --- infer, baseline, tune ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def infer_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert run("infer", "--cascades", sim_dir / "cascades.csv", "--mask", sim_dir / "mask.csv",
               "--out", out, "--rho", 5.0, "--max-em-iters", 20, "--threads", 1) == 0
    return out


def test_infer_outputs_and_rerun(infer_dir, sim_dir, tmp_path):
    fitted = json.loads((infer_dir / "fit.json").read_text())
    assert fitted["rho"] == 5.0 and fitted["iterations"] >= 1
    mask = io.read_network(sim_dir / "mask.csv") != 0
    assert np.all(io.read_network(infer_dir / "theta.csv")[~mask] == 0)
    trace = (infer_dir / "trace.csv").read_text().split("\n")
    assert trace[0] == "iteration,mean_marginal_loglik,elbo,psi_nuclear_norm"
    assert run("infer", "--cascades", sim_dir / "cascades.csv", "--mask", sim_dir / "mask.csv",
               "--out", tmp_path, "--rho", 5.0, "--max-em-iters", 20, "--threads", 4) == 0
    for name in ("theta.csv", "psi.csv", "pi.csv", "trace.csv", "fit.json", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (infer_dir / name).read_bytes()


def test_infer_without_mask_logs_a_notice(sim_dir, tmp_path, caplog):
    with caplog.at_level("WARNING"):
        assert run("infer", "--cascades", sim_dir / "cascades.csv", "--out", tmp_path, "--rho", 2.0,
                   "--max-em-iters", 3) == 0
    assert "no mask" in caplog.text


def test_infer_degenerate_data(tmp_path):
    io.write_cascades(tmp_path / "c.csv", CascadeSet(np.array([[0.0, 5.0]]), 5.0))
    assert run("infer", "--cascades", tmp_path / "c.csv", "--out", tmp_path / "o", "--rho", 1) == 2


def test_baseline_and_tune(sim_dir, tmp_path):
    assert run("baseline", "--cascades", sim_dir / "cascades.csv", "--out", tmp_path / "b") == 0
    net = io.read_network(tmp_path / "b" / "network.csv")
    assert net.shape == (12, 12) and net.sum() > 0
    assert run("tune", "--cascades", sim_dir / "cascades.csv", "--mask", sim_dir / "mask.csv",
               "--out", tmp_path / "t", "--grid", "1,4", "--max-em-iters", 5, "--threads", 1) == 0
    best = json.loads((tmp_path / "t" / "tune.json").read_text())["rho"]
    assert best in (1.0, 4.0)
    assert (tmp_path / "t" / "tune.csv").read_text().startswith("rho,validation_loglik\n1,")


# --- evaluate, diagnose ------------------------------------------------------------------------


def test_evaluate_self_and_threshold(sim_dir, tmp_path):
    assert run("evaluate", "--est", sim_dir, "--truth", sim_dir, "--out", tmp_path, "--threshold", 0.25) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["mae_theta"] == 0 and rep["mae_psi"] == 0 and rep["mae_pi"] == 0
    assert rep["acc_theta"] == 1 and rep["recall_psi"] == 1 and rep["edge_threshold"] == 0.25
    assert (tmp_path / "report.csv").read_text().count("\n") == 2


def _write_params(d, theta, psi, pi):
    d.mkdir()
    io.write_network(d / "theta.csv", theta)
    io.write_network(d / "psi.csv", psi)
    io.write_pi(d / "pi.csv", pi)


def test_evaluate_hand_case(tmp_path):
    truth = np.zeros((4, 4))
    truth[0, 1] = truth[1, 2] = truth[2, 3] = truth[3, 0] = 1.0
    est = np.zeros((4, 4))
    est[0, 1] = est[1, 2] = est[2, 3] = est[0, 2] = est[1, 3] = 0.5
    _write_params(tmp_path / "t", truth, truth, np.full(4, 0.5))
    _write_params(tmp_path / "e", est, est, np.full(4, 0.55))
    assert run("evaluate", "--est", tmp_path / "e", "--truth", tmp_path / "t", "--out", tmp_path / "r") == 0
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    assert rep["precision_theta"] == 0.6 and rep["recall_theta"] == 0.75
    assert rep["acc_theta"] == pytest.approx(2 / 3) and rep["mae_theta"] == pytest.approx((3 * 0.5 + 1) / 4)
    assert rep["mae_pi"] == pytest.approx(0.1)


def test_evaluate_shape_mismatch(tmp_path):
    _write_params(tmp_path / "a", np.zeros((3, 3)), np.zeros((3, 3)), np.full(3, 0.5))
    _write_params(tmp_path / "b", np.zeros((4, 4)), np.zeros((4, 4)), np.full(4, 0.5))
    assert run("evaluate", "--est", tmp_path / "a", "--truth", tmp_path / "b", "--out", tmp_path / "r") == 2


def test_diagnose(sim_dir, tmp_path):
    assert run("diagnose", "--mask", sim_dir / "mask.csv", "--psi", sim_dir / "psi.csv", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "diagnose.json").read_text())
    assert set(rep) == {"degree_term", "incoherence_term", "product", "flagged"}


# --- settings and exit codes -------------------------------------------------------------------


def test_exit_codes(tmp_path, capsys):
    assert run() == 1
    assert run("simulate", "--bogus", 1, "--out", tmp_path) == 1
    assert run("simulate") == 1  # missing --out
    assert run("infer", "--cascades", tmp_path / "nope.csv", "--out", tmp_path) == 2
    assert run("simulate", "--out", tmp_path, "--topology", "ring") == 2
    assert run("simulate", "--out", tmp_path, "--log-level", "chatty") == 1


def test_precedence_flags_env_config_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5, "n": 7}))
    s = resolve("simulate", {"config": str(cfg), "out": "x"}, environ={})
    assert (s["seed"], s["n"], s["window"]) == (5, 7, 10.0)
    s = resolve("simulate", {"config": str(cfg), "out": "x"}, environ={SEED_ENV: "9"})
    assert s["seed"] == 9
    s = resolve("simulate", {"config": str(cfg), "out": "x", "seed": 1}, environ={SEED_ENV: "9"})
    assert s["seed"] == 1


def test_config_rejects_unknown_and_mistyped_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": 1}))
    with pytest.raises(ValidationError):
        resolve("simulate", {"config": str(cfg), "out": "x"}, environ={})
    assert run("simulate", "--config", cfg, "--out", tmp_path / "o") == 2
    cfg.write_text(json.dumps({"n": "many"}))
    with pytest.raises(ValidationError):
        resolve("simulate", {"config": str(cfg), "out": "x"}, environ={})


def test_env_seed_changes_the_output(tmp_path, monkeypatch, sim_dir):
    monkeypatch.setenv(SEED_ENV, "3")
    assert run("simulate", "--out", tmp_path / "a", *SMALL) == 0
    assert (tmp_path / "a" / "cascades.csv").read_bytes() == (sim_dir / "cascades.csv").read_bytes()
    monkeypatch.setenv(SEED_ENV, "4")
    assert run("simulate", "--out", tmp_path / "b", *SMALL) == 0
    assert (tmp_path / "b" / "cascades.csv").read_bytes() != (sim_dir / "cascades.csv").read_bytes()
